// Shared fixtures for the unit tests.
#pragma once

#include "risbf/metrics.hpp"

#include <random>

namespace risbf::test {

struct Instance
{
    SystemConfig cfg;
    ChannelSet ch;
    Eigen::MatrixXcd x;
    Eigen::VectorXcd theta;
};

// Unstructured CN data, unrelated to the scene generator.
inline Instance random_instance(int L, int K, int M, int N, double sigma2_ris, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto c = [&] { return cplx(nd(rng), nd(rng)); };
    Instance in;
    in.cfg = SystemConfig::uniform(L, K, M, N, 10.0, 2.0, 0.5, 0.3, 0.7);
    if (sigma2_ris > 0) in.cfg.set_mode(RisMode::Active, 4.0, sigma2_ris);
    in.ch.g_mat.resize(N, L);
    for (int n = 0; n < N; ++n)
        for (int l = 0; l < L; ++l) in.ch.g_mat(n, l) = c();
    in.ch.h_direct.assign(K, Eigen::VectorXcd(L));
    in.ch.h_ris.assign(K, Eigen::VectorXcd(N));
    for (int k = 0; k < K; ++k)
    {
        for (int l = 0; l < L; ++l) in.ch.h_direct[k][l] = c();
        for (int n = 0; n < N; ++n) in.ch.h_ris[k][n] = c();
    }
    in.ch.g_ris.resize(N);
    for (int n = 0; n < N; ++n) in.ch.g_ris[n] = c();
    in.x.resize(L, K + M);
    for (int l = 0; l < L; ++l)
        for (int j = 0; j < K + M; ++j) in.x(l, j) = c();
    in.theta.resize(N);
    for (int n = 0; n < N; ++n) in.theta[n] = c();
    return in;
}

inline Eigen::MatrixXcd perturbed(const Eigen::MatrixXcd& m, double scale, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::MatrixXcd r = m;
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] += cplx(nd(rng), nd(rng));
    return r;
}

} // namespace risbf::test
