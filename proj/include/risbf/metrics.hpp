// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scene.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace risbf {

struct BeamformingSolution
{
    Eigen::MatrixXcd x_mat; // L x (K + M), communication columns first
    Eigen::VectorXcd theta; // N

    void validate(const SystemConfig& cfg) const
    {
        if (x_mat.rows() != cfg.L || x_mat.cols() != cfg.columns()) throw std::invalid_argument("BeamformingSolution: X must be L x (K+M)");
        if (theta.size() != cfg.N) throw std::invalid_argument("BeamformingSolution: theta must have N entries");
        if (!x_mat.allFinite() || !theta.allFinite()) throw std::invalid_argument("BeamformingSolution: non-finite entry");
    }
};

// sum_l h_l x_l, the row-times-column product of the model
inline cplx row_times(const Eigen::VectorXcd& h, const Eigen::Ref<const Eigen::VectorXcd>& x)
{
    return (h.array() * x.array()).sum();
}

inline Eigen::VectorXcd effective_user_channel(int k, const ChannelSet& ch, const Eigen::VectorXcd& theta)
{
    if (k < 0 || k >= ch.K()) throw std::invalid_argument("effective_user_channel: user index out of range");
    if (theta.size() != ch.N() || ch.h_ris[k].size() != ch.N() || ch.h_direct[k].size() != ch.L())
        throw std::invalid_argument("effective_user_channel: dimension mismatch");
    return ch.h_direct[k] + ch.g_mat.transpose() * ch.h_ris[k].cwiseProduct(theta);
}

inline Eigen::VectorXcd effective_target_channel(const ChannelSet& ch, const Eigen::VectorXcd& theta)
{
    if (theta.size() != ch.N() || ch.g_ris.size() != ch.N()) throw std::invalid_argument("effective_target_channel: dimension mismatch");
    return ch.g_mat.transpose() * ch.g_ris.cwiseProduct(theta);
}

inline double user_sinr(int k, const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, const ChannelSet& ch,
                        const SystemConfig& cfg)
{
    const Eigen::VectorXcd h = effective_user_channel(k, ch, theta);
    double interference = 0.0;
    for (int j = 0; j < x_mat.cols(); ++j)
        if (j != k) interference += std::norm(row_times(h, x_mat.col(j)));
    const double ris_noise = cfg.sigma2_ris * ch.h_ris[k].cwiseProduct(theta).squaredNorm();
    return std::norm(row_times(h, x_mat.col(k))) / (cfg.sigma2_user[k] + interference + ris_noise);
}

inline double leakage_sinr(int k, const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, const ChannelSet& ch,
                           const SystemConfig& cfg)
{
    const Eigen::VectorXcd g = effective_target_channel(ch, theta);
    double interference = 0.0;
    for (int j = 0; j < x_mat.cols(); ++j)
        if (j != k) interference += std::norm(row_times(g, x_mat.col(j)));
    const double ris_noise = cfg.sigma2_ris * ch.g_ris.cwiseProduct(theta).squaredNorm();
    return std::norm(row_times(g, x_mat.col(k))) / (cfg.sigma2_target + interference + ris_noise);
}

inline double beampattern_gain(const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, const ChannelSet& ch,
                               const SystemConfig& cfg)
{
    const Eigen::VectorXcd g = effective_target_channel(ch, theta);
    double gain = cfg.sigma2_ris * ch.g_ris.cwiseProduct(theta).squaredNorm();
    for (int j = 0; j < x_mat.cols(); ++j) gain += std::norm(row_times(g, x_mat.col(j)));
    return gain;
}

// ||X||^2 + w (||Theta G X||^2 + sigma_I^2 ||theta||^2); w = 1 for physical data.
inline double total_power(const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, const Eigen::MatrixXcd& g_mat,
                          double sigma2_ris, double reflect_weight = 1.0)
{
    const Eigen::MatrixXcd reflected = theta.asDiagonal() * (g_mat * x_mat);
    return x_mat.squaredNorm() + reflect_weight * (reflected.squaredNorm() + sigma2_ris * theta.squaredNorm());
}

// Power charged against the budget: the full model for an active RIS, the BS term only for a passive one.
inline double budget_power(const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, const ChannelSet& ch, const SystemConfig& cfg)
{
    if (cfg.ris_mode == RisMode::Passive) return x_mat.squaredNorm();
    return total_power(x_mat, theta, ch.g_mat, cfg.sigma2_ris, cfg.reflect_power_weight);
}

struct ConstraintResidual
{
    std::string name;
    double value; // >= 0 means satisfied
};

struct MetricReport
{
    std::vector<double> user_sinr;
    std::vector<double> leakage_sinr;
    double beampattern_gain = 0.0;
    double total_power = 0.0;
    std::vector<ConstraintResidual> constraint_residuals;

    double worst_residual() const
    {
        double w = std::numeric_limits<double>::infinity();
        for (const auto& r : constraint_residuals) w = std::min(w, r.value);
        return w;
    }

    // True when no residual falls below -tol.
    bool feasible(double tol) const
    {
        for (const auto& r : constraint_residuals)
            if (r.value < -tol) return false;
        return true;
    }
};

inline MetricReport constraint_report(const BeamformingSolution& sol, const ChannelSet& ch, const SystemConfig& cfg)
{
    sol.validate(cfg);
    MetricReport rep;
    for (int k = 0; k < cfg.K; ++k)
    {
        rep.user_sinr.push_back(user_sinr(k, sol.x_mat, sol.theta, ch, cfg));
        rep.leakage_sinr.push_back(leakage_sinr(k, sol.x_mat, sol.theta, ch, cfg));
    }
    rep.beampattern_gain = beampattern_gain(sol.x_mat, sol.theta, ch, cfg);
    rep.total_power = budget_power(sol.x_mat, sol.theta, ch, cfg);
    for (int k = 0; k < cfg.K; ++k)
        rep.constraint_residuals.push_back({"user_sinr_" + std::to_string(k), rep.user_sinr[k] - cfg.gamma_c[k]});
    for (int k = 0; k < cfg.K; ++k)
        rep.constraint_residuals.push_back({"leakage_sinr_" + std::to_string(k), cfg.gamma_t[k] - rep.leakage_sinr[k]});
    rep.constraint_residuals.push_back({"power", cfg.p_max - rep.total_power});
    const double bound = cfg.ris_mode == RisMode::Passive ? 1.0 : cfg.beta_max;
    for (int n = 0; n < cfg.N; ++n)
        rep.constraint_residuals.push_back({"amplitude_" + std::to_string(n), bound - std::abs(sol.theta[n])});
    return rep;
}

// Column order of metrics_csv_row.
inline std::string metrics_csv_header(int K)
{
    std::string h = "beampattern_gain,total_power,worst_residual";
    for (int k = 0; k < K; ++k) h += ",user_sinr_" + std::to_string(k);
    for (int k = 0; k < K; ++k) h += ",leakage_sinr_" + std::to_string(k);
    return h;
}

inline std::string metrics_csv_row(const MetricReport& r)
{
    auto f = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.17g", v);
        return std::string(b);
    };
    std::string s = f(r.beampattern_gain) + "," + f(r.total_power) + "," + f(r.worst_residual());
    for (double v : r.user_sinr) s += "," + f(v);
    for (double v : r.leakage_sinr) s += "," + f(v);
    return s;
}

} // namespace risbf
