#include "risbf/metrics.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace risbf;
using Catch::Approx;
using test::Instance;
using test::random_instance;

namespace {

// Brute-force oracle: explicit index loops.
cplx oracle_hk_dot(const Instance& in, int k, int col)
{
    cplx s = 0;
    for (int l = 0; l < in.cfg.L; ++l)
    {
        cplx hl = in.ch.h_direct[k][l];
        for (int n = 0; n < in.cfg.N; ++n) hl += in.ch.h_ris[k][n] * in.theta[n] * in.ch.g_mat(n, l);
        s += hl * in.x(l, col);
    }
    return s;
}

cplx oracle_gt_dot(const Instance& in, int col)
{
    cplx s = 0;
    for (int l = 0; l < in.cfg.L; ++l)
        for (int n = 0; n < in.cfg.N; ++n) s += in.ch.g_ris[n] * in.theta[n] * in.ch.g_mat(n, l) * in.x(l, col);
    return s;
}

double oracle_ris_noise(const Eigen::VectorXcd& h, const Eigen::VectorXcd& theta)
{
    double s = 0;
    for (int n = 0; n < h.size(); ++n) s += std::norm(h[n] * theta[n]);
    return s;
}

double oracle_user_sinr(const Instance& in, int k)
{
    double den = in.cfg.sigma2_user[k] + in.cfg.sigma2_ris * oracle_ris_noise(in.ch.h_ris[k], in.theta);
    for (int j = 0; j < in.cfg.K + in.cfg.M; ++j)
        if (j != k) den += std::norm(oracle_hk_dot(in, k, j));
    return std::norm(oracle_hk_dot(in, k, k)) / den;
}

double oracle_leakage(const Instance& in, int k)
{
    double den = in.cfg.sigma2_target + in.cfg.sigma2_ris * oracle_ris_noise(in.ch.g_ris, in.theta);
    for (int j = 0; j < in.cfg.K + in.cfg.M; ++j)
        if (j != k) den += std::norm(oracle_gt_dot(in, j));
    return std::norm(oracle_gt_dot(in, k)) / den;
}

double oracle_gain(const Instance& in)
{
    double s = in.cfg.sigma2_ris * oracle_ris_noise(in.ch.g_ris, in.theta);
    for (int j = 0; j < in.cfg.K + in.cfg.M; ++j) s += std::norm(oracle_gt_dot(in, j));
    return s;
}

double oracle_power(const Instance& in)
{
    double s = 0;
    for (int l = 0; l < in.cfg.L; ++l)
        for (int j = 0; j < in.cfg.K + in.cfg.M; ++j) s += std::norm(in.x(l, j));
    for (int n = 0; n < in.cfg.N; ++n)
    {
        for (int j = 0; j < in.cfg.K + in.cfg.M; ++j)
        {
            cplx r = 0;
            for (int l = 0; l < in.cfg.L; ++l) r += in.ch.g_mat(n, l) * in.x(l, j);
            s += std::norm(in.theta[n] * r);
        }
        s += in.cfg.sigma2_ris * std::norm(in.theta[n]);
    }
    return s;
}

} // namespace

TEST_CASE("effective user channel")
{
    const Instance in = random_instance(3, 2, 1, 4, 0.0, 1);
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(4);
    CHECK((effective_user_channel(0, in.ch, zero) - in.ch.h_direct[0]).norm() == 0.0);

    const Eigen::VectorXcd h = effective_user_channel(1, in.ch, in.theta);
    for (int l = 0; l < 3; ++l)
    {
        cplx e = in.ch.h_direct[1][l];
        for (int n = 0; n < 4; ++n) e += in.ch.h_ris[1][n] * in.theta[n] * in.ch.g_mat(n, l);
        CHECK(std::abs(h[l] - e) <= 1e-12 * std::abs(e));
    }
    CHECK_THROWS_AS(effective_user_channel(2, in.ch, in.theta), std::invalid_argument);
    CHECK_THROWS_AS(effective_user_channel(0, in.ch, Eigen::VectorXcd::Ones(3)), std::invalid_argument);
}

TEST_CASE("single-element cascade")
{
    Instance in = random_instance(3, 1, 0, 1, 0.0, 2);
    in.ch.h_direct[0].setZero();
    const Eigen::VectorXcd one = Eigen::VectorXcd::Ones(1);
    const Eigen::VectorXcd h = effective_user_channel(0, in.ch, one);
    for (int l = 0; l < 3; ++l) CHECK(std::abs(h[l] - in.ch.h_ris[0][0] * in.ch.g_mat(0, l)) <= 1e-14);

    const Eigen::VectorXcd th = Eigen::VectorXcd::Constant(1, cplx(0.3, -0.4));
    const Eigen::VectorXcd g = effective_target_channel(in.ch, th);
    for (int l = 0; l < 3; ++l) CHECK(std::abs(g[l] - th[0] * in.ch.g_ris[0] * in.ch.g_mat(0, l)) <= 1e-14);
    CHECK(effective_target_channel(in.ch, Eigen::VectorXcd::Zero(1)).norm() == 0.0);
}

TEST_CASE("single-term user SINR arithmetic")
{
    // h_1 x_{c,1} = 1 with sigma^2 = 0.5 gives SINR 2.
    SystemConfig cfg = SystemConfig::uniform(1, 1, 0, 1, 1.0, 1.0, 1.0, 0.5, 1.0);
    ChannelSet ch;
    ch.g_mat = Eigen::MatrixXcd::Zero(1, 1);
    ch.h_direct = {Eigen::VectorXcd::Ones(1)};
    ch.h_ris = {Eigen::VectorXcd::Zero(1)};
    ch.g_ris = Eigen::VectorXcd::Zero(1);
    const Eigen::MatrixXcd x = Eigen::MatrixXcd::Ones(1, 1);
    CHECK(user_sinr(0, x, Eigen::VectorXcd::Ones(1), ch, cfg) == Approx(2.0).epsilon(1e-15));
    CHECK(user_sinr(0, Eigen::MatrixXcd::Zero(1, 1), Eigen::VectorXcd::Ones(1), ch, cfg) == 0.0);
}

TEST_CASE("all metrics agree with the brute-force oracle")
{
    for (unsigned seed = 10; seed < 20; ++seed)
        for (double s2 : {0.0, 0.37})
        {
            const Instance in = random_instance(3, 2, 2, 5, s2, seed);
            for (int k = 0; k < 2; ++k)
            {
                CHECK(user_sinr(k, in.x, in.theta, in.ch, in.cfg) == Approx(oracle_user_sinr(in, k)).epsilon(1e-10));
                CHECK(leakage_sinr(k, in.x, in.theta, in.ch, in.cfg) == Approx(oracle_leakage(in, k)).epsilon(1e-10));
            }
            CHECK(beampattern_gain(in.x, in.theta, in.ch, in.cfg) == Approx(oracle_gain(in)).epsilon(1e-10));
            CHECK(total_power(in.x, in.theta, in.ch.g_mat, in.cfg.sigma2_ris) == Approx(oracle_power(in)).epsilon(1e-10));
        }
}

TEST_CASE("trivial metric limits")
{
    Instance in = random_instance(3, 2, 1, 4, 0.25, 3);
    const Eigen::MatrixXcd X0 = Eigen::MatrixXcd::Zero(3, 3);
    const Eigen::VectorXcd th0 = Eigen::VectorXcd::Zero(4);
    const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(4);

    CHECK(user_sinr(0, X0, in.theta, in.ch, in.cfg) == 0.0);
    CHECK(leakage_sinr(1, in.x, th0, in.ch, in.cfg) == 0.0);
    Eigen::MatrixXcd xk = in.x;
    xk.col(0).setZero();
    CHECK(leakage_sinr(0, xk, in.theta, in.ch, in.cfg) == 0.0);

    CHECK(beampattern_gain(X0, ones, in.ch, in.cfg) == Approx(0.25 * in.ch.g_ris.squaredNorm()).epsilon(1e-14));
    SystemConfig passive = in.cfg;
    passive.set_mode(RisMode::Passive);
    CHECK(beampattern_gain(X0, ones, in.ch, passive) == 0.0);

    CHECK(total_power(in.x, th0, in.ch.g_mat, 0.25) == Approx(in.x.squaredNorm()).epsilon(1e-14));
    CHECK(total_power(X0, in.theta, in.ch.g_mat, 0.25) == Approx(0.25 * in.theta.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("common phase rotation of theta leaves passive metrics unchanged")
{
    const Instance in = random_instance(4, 2, 2, 6, 0.0, 4);
    const Eigen::VectorXcd rot = in.theta * std::polar(1.0, 1.234);
    CHECK(beampattern_gain(in.x, rot, in.ch, in.cfg) == Approx(beampattern_gain(in.x, in.theta, in.ch, in.cfg)).epsilon(1e-9));
    for (int k = 0; k < 2; ++k)
    {
        CHECK(leakage_sinr(k, in.x, rot, in.ch, in.cfg) == Approx(leakage_sinr(k, in.x, in.theta, in.ch, in.cfg)).epsilon(1e-9));
        // Direct links break user-side invariance unless X rotates too.
        Instance nd = in;
        for (auto& h : nd.ch.h_direct) h.setZero();
        CHECK(user_sinr(k, nd.x, rot, nd.ch, nd.cfg) == Approx(user_sinr(k, nd.x, nd.theta, nd.ch, nd.cfg)).epsilon(1e-9));
    }
}

TEST_CASE("total power grows with each RIS amplitude")
{
    const Instance in = random_instance(3, 2, 1, 4, 0.1, 5);
    for (int n = 0; n < 4; ++n)
    {
        Eigen::VectorXcd th = in.theta;
        double prev = -1.0;
        for (double a : {0.0, 0.5, 1.0, 2.0, 4.0})
        {
            th[n] = std::polar(a, 0.7);
            const double p = total_power(in.x, th, in.ch.g_mat, 0.1);
            CHECK(p >= prev);
            prev = p;
        }
    }
}

TEST_CASE("constraint report signs")
{
    Instance in = random_instance(3, 2, 1, 4, 0.1, 6);
    BeamformingSolution zero{Eigen::MatrixXcd::Zero(3, 3), in.theta};
    const MetricReport r0 = constraint_report(zero, in.ch, in.cfg);
    CHECK(r0.constraint_residuals[0].value < 0.0);
    CHECK(r0.constraint_residuals[1].value < 0.0);

    BeamformingSolution s{in.x, in.theta};
    in.cfg.p_max = total_power(in.x, in.theta, in.ch.g_mat, in.cfg.sigma2_ris);
    const MetricReport r = constraint_report(s, in.ch, in.cfg);
    double power_residual = 1.0;
    for (const auto& c : r.constraint_residuals)
        if (c.name == "power") power_residual = c.value;
    CHECK(power_residual == 0.0);
    CHECK(r.beampattern_gain >= 0.0);
    CHECK(r.constraint_residuals.size() == static_cast<size_t>(2 * 2 + 1 + 4));
}
