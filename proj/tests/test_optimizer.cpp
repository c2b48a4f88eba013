#include "risbf/io.hpp"
#include "risbf/optimizer.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace risbf;
using Catch::Approx;

namespace {

Scenario small_scenario(RisMode mode, int N = 8)
{
    Scenario s;
    s.N = N;
    s.mode = mode;
    return s;
}

IterationRecord record(int i, double gain)
{
    IterationRecord r;
    r.iteration = i;
    r.true_gain = gain;
    return r;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

void check_trace(const OptimizeResult& r, const SystemConfig& cfg, bool monotone_gain)
{
    double prev = r.trace.initial_gain;
    for (const auto& rec : r.trace.records)
    {
        INFO("iteration " << rec.iteration);
        CHECK(rec.worst_residual >= -1e-6);
        if (monotone_gain) CHECK(rec.true_gain >= prev * (1.0 - 1e-8));
        prev = rec.true_gain;
    }
    const double bound = cfg.ris_mode == RisMode::Passive ? 1.0 : cfg.beta_max;
    CHECK(r.solution.theta.cwiseAbs().maxCoeff() <= bound + 1e-8);
}

} // namespace

TEST_CASE("scaling factor from the largest channel entry")
{
    test::Instance in = test::random_instance(3, 2, 1, 4, 0.0, 1);
    const double mx = max_channel_magnitude(in.ch);
    SECTION("already at epsilon")
    {
        const ScaledProblem sp = scale_problem(in.ch, in.cfg, mx);
        CHECK(sp.state.varsigma == Approx(1.0).epsilon(1e-15));
        CHECK((sp.channels.g_mat - in.ch.g_mat).norm() <= 1e-14 * in.ch.g_mat.norm());
    }
    SECTION("max entry 100 with epsilon 10")
    {
        in.ch.g_mat(0, 0) = cplx(60.0, 80.0);
        CHECK(scale_problem(in.ch, in.cfg, 10.0).state.varsigma == Approx(0.1).epsilon(1e-15));
    }
    SECTION("all-zero channels are rejected")
    {
        in.ch.g_mat.setZero();
        in.ch.g_ris.setZero();
        for (auto& h : in.ch.h_direct) h.setZero();
        for (auto& h : in.ch.h_ris) h.setZero();
        CHECK_THROWS_AS(scale_problem(in.ch, in.cfg, 10.0), std::invalid_argument);
    }
}

TEST_CASE("scaling keeps SINRs and multiplies the gain by varsigma squared")
{
    for (unsigned seed = 2; seed < 8; ++seed)
        for (double s2 : {0.0, 0.2})
        {
            const test::Instance in = test::random_instance(3, 2, 2, 5, s2, seed);
            const ScaledProblem sp = scale_problem(in.ch, in.cfg, 10.0);
            const double s = sp.state.varsigma;
            for (int k = 0; k < 2; ++k)
            {
                CHECK(user_sinr(k, in.x, in.theta, sp.channels, sp.config) == Approx(user_sinr(k, in.x, in.theta, in.ch, in.cfg)).epsilon(1e-10));
                CHECK(leakage_sinr(k, in.x, in.theta, sp.channels, sp.config) ==
                      Approx(leakage_sinr(k, in.x, in.theta, in.ch, in.cfg)).epsilon(1e-10));
            }
            const double g = beampattern_gain(in.x, in.theta, in.ch, in.cfg);
            CHECK(beampattern_gain(in.x, in.theta, sp.channels, sp.config) == Approx(s * s * g).epsilon(1e-10));
            CHECK(descale_gain(beampattern_gain(in.x, in.theta, sp.channels, sp.config), sp.state) == Approx(g).epsilon(1e-10));

            // The budget keeps physical units.
            CHECK(total_power(in.x, in.theta, sp.channels.g_mat, sp.config.sigma2_ris, sp.config.reflect_power_weight) ==
                  Approx(total_power(in.x, in.theta, in.ch.g_mat, in.cfg.sigma2_ris)).epsilon(1e-10));

            const ChannelSet back = descale_channels(sp.channels, sp.state);
            CHECK((back.g_mat - in.ch.g_mat).cwiseAbs().maxCoeff() <= 1e-12 * in.ch.g_mat.cwiseAbs().maxCoeff());
            CHECK((back.g_ris - in.ch.g_ris).cwiseAbs().maxCoeff() <= 1e-12 * in.ch.g_ris.cwiseAbs().maxCoeff());
            for (int k = 0; k < 2; ++k)
            {
                CHECK((back.h_direct[k] - in.ch.h_direct[k]).cwiseAbs().maxCoeff() <= 1e-12 * in.ch.h_direct[k].cwiseAbs().maxCoeff());
                CHECK((back.h_ris[k] - in.ch.h_ris[k]).cwiseAbs().maxCoeff() <= 1e-12 * in.ch.h_ris[k].cwiseAbs().maxCoeff());
            }
        }
}

TEST_CASE("descale gain arithmetic")
{
    CHECK(descale_gain(0.37, ScaleState{1.0}) == 0.37);
    CHECK(descale_gain(0.05, ScaleState{0.1}) == Approx(5.0).epsilon(1e-14));
}

TEST_CASE("convergence test")
{
    SolverSettings s;
    IterationTrace t;
    CHECK_FALSE(converged(t, s));
    t.initial_gain = 1.0;
    t.records.push_back(record(1, 2.0));
    t.records.push_back(record(2, 3.0));
    t.records.push_back(record(3, 3.0 * (1.0 + 2e-3)));
    CHECK_FALSE(converged(t, s));
    t.records.push_back(record(4, t.records.back().true_gain));
    CHECK(converged(t, s));

    IterationTrace long_run;
    for (int i = 1; i <= 50; ++i) long_run.records.push_back(record(i, double(i)));
    CHECK(converged(long_run, s));
    long_run.records.pop_back();
    CHECK_FALSE(converged(long_run, s));
}

TEST_CASE("default start spends half the budget")
{
    for (RisMode mode : {RisMode::Passive, RisMode::Active})
    {
        const Scenario sc = small_scenario(mode);
        const SystemConfig cfg = sc.system_config();
        const ChannelSet ch = sc.channels(0);
        const BeamformingSolution s = default_start(ch, cfg);
        CHECK(budget_power(s.x_mat, s.theta, ch, cfg) == Approx(0.5 * cfg.p_max).epsilon(1e-12));
        const double amp = mode == RisMode::Passive ? 1.0 : 0.5 * cfg.beta_max;
        for (int n = 0; n < cfg.N; ++n) CHECK(s.theta[n] == cplx(amp, 0.0));
    }
}

TEST_CASE("feasibility phase")
{
    SECTION("generous configuration")
    {
        Scenario sc = small_scenario(RisMode::Passive);
        sc.gamma_c_db = {0.0};
        const SystemConfig cfg = sc.system_config();
        const ChannelSet ch = sc.channels(0);
        const InitResult init = initialize(ch, cfg, sc.solver);
        REQUIRE(init.feasible);
        CHECK(init.sum_delta <= 1e-7);
        CHECK(constraint_report(init.start, ch, cfg).worst_residual() >= -1e-6);

        // The first optimization subproblem from this start solves cleanly.
        const conic::SolveResult r = conic::solve(first_program(ch, cfg, sc.solver, false, init.start), sc.solver.conic);
        CHECK(r.status == conic::Status::Optimal);
    }
    SECTION("unsatisfiable configuration")
    {
        Scenario sc = small_scenario(RisMode::Active);
        sc.gamma_c_db = {120.0};
        sc.p_max_dbm = 0.0;
        const InitResult init = initialize(sc.channels(0), sc.system_config(), sc.solver);
        CHECK_FALSE(init.feasible);
        CHECK(init.sum_delta > 0.0);
        CHECK_FALSE(init.diagnostics.empty());
    }
}

TEST_CASE("active driver: monotone, feasible at every iterate, within the bounds")
{
    const Scenario sc = small_scenario(RisMode::Active);
    const SystemConfig cfg = sc.system_config();
    for (int seed : {0, 1})
    {
        const ChannelSet ch = sc.channels(seed);
        const RunResult r = run(ch, cfg, sc.solver);
        REQUIRE(r.feasible);
        check_trace(r.opt, cfg, true);
        CHECK(r.report.feasible(1e-6));
        CHECK(total_power(r.opt.solution.x_mat, r.opt.solution.theta, ch.g_mat, cfg.sigma2_ris) <= cfg.p_max * (1.0 + 1e-8));
        CHECK(r.report.beampattern_gain >= r.opt.trace.initial_gain);
    }
    CHECK_THROWS_AS(optimize_aris(sc.channels(0), small_scenario(RisMode::Passive).system_config(), sc.solver,
                                  Eigen::MatrixXcd::Zero(4, 7), Eigen::VectorXcd::Ones(8)),
                    std::invalid_argument);
}

TEST_CASE("passive driver: penalty binds and the BS budget holds")
{
    const Scenario sc = small_scenario(RisMode::Passive);
    const SystemConfig cfg = sc.system_config();
    for (int seed : {0, 1})
    {
        const ChannelSet ch = sc.channels(seed);
        const RunResult r = run(ch, cfg, sc.solver);
        REQUIRE(r.feasible);
        check_trace(r.opt, cfg, false);
        CHECK(r.opt.binding);
        double dev = 0.0;
        for (int n = 0; n < cfg.N; ++n) dev = std::max(dev, std::abs(1.0 - std::abs(r.opt.solution.theta[n])));
        CHECK(dev <= 1e-3);
        CHECK(r.opt.solution.x_mat.squaredNorm() <= cfg.p_max * (1.0 + 1e-8));
        // The surrogate-plus-penalty objective never drops within a penalty stage.
        for (size_t i = 1; i < r.opt.trace.records.size(); ++i)
            if (r.opt.trace.records[i].stage == r.opt.trace.records[i - 1].stage)
                CHECK(r.opt.trace.records[i].surrogate >= r.opt.trace.records[i - 1].surrogate * (1.0 - 1e-8));
    }
}

TEST_CASE("stopping early still returns a feasible design")
{
    Scenario sc = small_scenario(RisMode::Active);
    sc.solver.max_sca_iters = 5;
    sc.solver.sca_tolerance = 1e-12;
    const SystemConfig cfg = sc.system_config();
    const ChannelSet ch = sc.channels(2);
    const RunResult r = run(ch, cfg, sc.solver);
    REQUIRE(r.feasible);
    CHECK(r.opt.trace.records.size() <= 5u);
    CHECK(constraint_report(r.opt.solution, ch, cfg).feasible(1e-6));
}

TEST_CASE("scaled and unscaled runs agree")
{
    Scenario sc = small_scenario(RisMode::Active);
    const SystemConfig cfg = sc.system_config();
    const ChannelSet ch = sc.channels(3);
    const RunResult scaled = run(ch, cfg, sc.solver);
    sc.solver.apply_scaling = false;
    const RunResult plain = run(ch, cfg, sc.solver);
    REQUIRE(scaled.feasible);
    REQUIRE(plain.feasible);
    CHECK(relative_gap(scaled.report.beampattern_gain, plain.report.beampattern_gain) <= 1e-4);
}

TEST_CASE("active RIS with unit gain and no amplifier noise approaches the passive design")
{
    // The reflected-power term is tiny next to the BS term here, so the feasible sets nearly coincide;
    // the two drivers stop at nearby stationary points.
    Scenario sc = small_scenario(RisMode::Passive, 16);
    sc.beta_max = 1.0;
    sc.sigma2_ris_dbm = -270.0;
    for (int seed : {0, 1})
    {
        const ChannelSet ch = sc.channels(seed);
        const RunResult p = run(ch, sc.system_config(RisMode::Passive), sc.solver);
        const RunResult a = run(ch, sc.system_config(RisMode::Active), sc.solver);
        REQUIRE(p.feasible);
        REQUIRE(a.feasible);
        CHECK(relative_gap(p.report.beampattern_gain, a.report.beampattern_gain) <= 0.02);
    }
}
