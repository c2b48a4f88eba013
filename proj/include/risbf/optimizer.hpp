// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "conic/solver.hpp"
#include "metrics.hpp"
#include "sca.hpp"
#include "scene.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace risbf {

struct SolverSettings
{
    double sca_tolerance = 1e-3;
    int max_sca_iters = 50;
    double zeta = 0.0; // 0: take config.zeta, or the automatic schedule when that is 0 too
    double unit_modulus_tol = 1e-3;
    double scale_epsilon = 10.0;
    bool apply_scaling = true;
    int max_zeta_escalations = 3;
    double feasibility_threshold = 1e-7; // on the optimal slack sum
    double feasibility_margin = 1e-6;    // relative tightening used while searching for a start
    double residual_tol = 1e-6;          // accepted violation of the original constraints
    bool keep_iterates = false;          // store every accepted design in the trace
    conic::Settings conic;

    void validate() const
    {
        if (!(sca_tolerance > 0.0) || max_sca_iters < 1 || !(unit_modulus_tol > 0.0) || !(scale_epsilon > 0.0) || zeta < 0.0)
            throw std::invalid_argument("SolverSettings: values must be positive");
    }
};

// ---------------------------------------------------------------------------
// Scaling.

struct ScaleState
{
    double varsigma = 1.0;
};

struct ScaledProblem
{
    ScaleState state;
    ChannelSet channels;
    SystemConfig config;
};

inline double max_channel_magnitude(const ChannelSet& ch)
{
    double m = ch.g_mat.cwiseAbs().maxCoeff();
    m = std::max(m, ch.g_ris.cwiseAbs().maxCoeff());
    for (const auto& h : ch.h_direct)
        if (h.size()) m = std::max(m, h.cwiseAbs().maxCoeff());
    for (const auto& h : ch.h_ris) m = std::max(m, h.cwiseAbs().maxCoeff());
    return m;
}

// Channels: sqrt(s) G, s h_D, sqrt(s) h_R, sqrt(s) g_R. Noise: s^2 sigma_k^2, s^2 sigma_t^2, s sigma_I^2.
// The RIS noise takes one power of s (not two) so that it scales like the cascaded signal it rides on;
// the budget keeps its units through reflect_power_weight = 1/s.
inline ScaledProblem scale_problem(const ChannelSet& ch, const SystemConfig& cfg, double scale_epsilon)
{
    const double mx = max_channel_magnitude(ch);
    if (!(mx > 0.0)) throw std::invalid_argument("scale_problem: all channels are zero");
    const double s = scale_epsilon / mx;
    const double rs = std::sqrt(s);
    ScaledProblem p;
    p.state.varsigma = s;
    p.channels.g_mat = rs * ch.g_mat;
    p.channels.g_ris = rs * ch.g_ris;
    for (const auto& h : ch.h_direct) p.channels.h_direct.push_back(s * h);
    for (const auto& h : ch.h_ris) p.channels.h_ris.push_back(rs * h);
    p.config = cfg;
    for (auto& v : p.config.sigma2_user) v *= s * s;
    p.config.sigma2_target *= s * s;
    p.config.sigma2_ris *= s;
    p.config.reflect_power_weight /= s;
    return p;
}

inline ChannelSet descale_channels(const ChannelSet& scaled, const ScaleState& st)
{
    const double s = st.varsigma, rs = std::sqrt(s);
    ChannelSet ch;
    ch.g_mat = scaled.g_mat / rs;
    ch.g_ris = scaled.g_ris / rs;
    for (const auto& h : scaled.h_direct) ch.h_direct.push_back(h / s);
    for (const auto& h : scaled.h_ris) ch.h_ris.push_back(h / rs);
    return ch;
}

inline double descale_gain(double gain_scaled, const ScaleState& st) { return gain_scaled / (st.varsigma * st.varsigma); }

// ---------------------------------------------------------------------------
// Trace and convergence.

struct IterationRecord
{
    int iteration = 0;
    int stage = 0;                 // penalty stage (passive RIS) or 0
    double zeta = 0.0;             // penalty weight in physical units
    double surrogate = 0.0;        // surrogate value at the accepted iterate (solver units)
    double true_gain = 0.0;        // beampattern gain in watts
    double worst_residual = 0.0;   // min over constraint residuals of the original problem
    double solve_time = 0.0;       // seconds
    int solver_iterations = 0;
    std::string solver_status;
};

struct IterationTrace
{
    double initial_gain = 0.0;
    std::vector<IterationRecord> records;
    std::vector<BeamformingSolution> iterates; // parallel to records when kept
};

inline bool converged(const IterationTrace& trace, const SolverSettings& settings)
{
    if (trace.records.empty()) return false;
    if (static_cast<int>(trace.records.size()) >= settings.max_sca_iters) return true;
    const double cur = trace.records.back().true_gain;
    const double prev = trace.records.size() >= 2 ? trace.records[trace.records.size() - 2].true_gain : trace.initial_gain;
    const double denom = std::max(std::abs(prev), std::numeric_limits<double>::min());
    return std::abs(cur - prev) / denom <= settings.sca_tolerance;
}

// ---------------------------------------------------------------------------
// Starting point.

// Maximum-ratio columns toward each user, sensing columns toward the target, theta at phase 0
// with modulus 1 (passive) or beta_max/2 (active), scaled to half the budget.
inline BeamformingSolution default_start(const ChannelSet& ch, const SystemConfig& cfg)
{
    BeamformingSolution s;
    const double amp = cfg.ris_mode == RisMode::Passive ? 1.0 : 0.5 * cfg.beta_max;
    s.theta = Eigen::VectorXcd::Constant(cfg.N, cplx(amp, 0.0));
    s.x_mat = Eigen::MatrixXcd::Zero(cfg.L, cfg.columns());
    auto unit = [&](Eigen::VectorXcd v, int fallback) {
        const double n = v.norm();
        if (n > 0.0) return Eigen::VectorXcd(v / n);
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(cfg.L);
        e[fallback % cfg.L] = 1.0;
        return e;
    };
    for (int k = 0; k < cfg.K; ++k) s.x_mat.col(k) = unit(effective_user_channel(k, ch, s.theta).conjugate(), k);
    const Eigen::VectorXcd gt = effective_target_channel(ch, s.theta).conjugate();
    for (int m = 0; m < cfg.M; ++m) s.x_mat.col(cfg.K + m) = unit(gt, m);

    const double w = cfg.ris_mode == RisMode::Active ? cfg.reflect_power_weight : 0.0;
    const double fixed = w * cfg.sigma2_ris * s.theta.squaredNorm();
    const double var = budget_power(s.x_mat, s.theta, ch, cfg) - fixed;
    const double target = 0.5 * cfg.p_max - fixed;
    if (var > 0.0 && target > 0.0) s.x_mat *= std::sqrt(target / var);
    return s;
}

namespace detail {

enum class StepKind { Active, Passive, Feasibility };

struct StepResult
{
    conic::SolveResult solve;
    BeamformingSolution candidate;
    double surrogate_at_candidate = 0.0;
    double surrogate_at_expansion = 0.0;
    double sum_delta = 0.0;
    bool usable = false;
};

// Clips |theta_n| to its bound and shrinks X until the budget holds.
inline void polish(BeamformingSolution& s, const ChannelSet& ch, const SystemConfig& cfg)
{
    const double bound = cfg.ris_mode == RisMode::Passive ? 1.0 : cfg.beta_max;
    for (int n = 0; n < s.theta.size(); ++n)
        if (std::abs(s.theta[n]) > bound) s.theta[n] *= bound / std::abs(s.theta[n]);
    const double p = budget_power(s.x_mat, s.theta, ch, cfg);
    if (p > cfg.p_max)
    {
        const double fixed = cfg.ris_mode == RisMode::Active ? cfg.reflect_power_weight * cfg.sigma2_ris * s.theta.squaredNorm() : 0.0;
        const double var = p - fixed;
        if (var > 0.0 && cfg.p_max > fixed) s.x_mat *= std::sqrt((cfg.p_max - fixed) / var) * (1.0 - 1e-15);
    }
}

inline SystemConfig tightened(SystemConfig cfg, double margin)
{
    for (auto& g : cfg.gamma_c) g *= 1.0 + margin;
    for (auto& g : cfg.gamma_t) g *= 1.0 - margin;
    cfg.p_max *= 1.0 - margin;
    return cfg;
}

struct Subproblem
{
    conic::ConicProgram program;
    sca::VariableLayout var;
    sca::ConcaveObjective obj;
    sca::FeasibilityVariables fv;
};

// The SOCP solved by one SCA step around cur (scaled data).
inline Subproblem build_subproblem(StepKind kind, const ChannelSet& ch, const SystemConfig& cfg, const BeamformingSolution& cur,
                                   double zeta)
{
    Subproblem sp;
    conic::ConicProgram& p = sp.program;
    sp.var = sca::add_beamforming_variables(p, cfg);
    const sca::SlackSet sl = sca::SlackSet::allocate(p, cfg, cfg.ris_mode == RisMode::Active);
    const sca::ExpansionPoint exp = sca::ExpansionPoint::make(cur.x_mat, cur.theta, ch, cfg);

    sca::ConstraintSet cs;
    if (kind == StepKind::Feasibility)
    {
        sp.fv = sca::FeasibilityVariables::allocate(p, cfg.K);
        std::tie(sp.obj, cs) = sca::feasibility_blocks(exp, sp.var, ch, cfg, sl, sp.fv);
    }
    else
    {
        sp.obj = kind == StepKind::Active ? sca::objective_lower_bound(exp, sp.var, ch, cfg) : sca::pris_objective(exp, sp.var, ch, cfg, zeta);
        cs = sca::restricted_constraints(exp, sp.var, ch, cfg, sl);
    }
    cs.emit(p);
    sp.obj.emit(p);
    return sp;
}

inline StepResult sca_step(StepKind kind, const ChannelSet& ch, const SystemConfig& cfg, const BeamformingSolution& cur, double zeta,
                           const SolverSettings& settings)
{
    const Subproblem sp = build_subproblem(kind, ch, cfg, cur, zeta);
    const conic::ConicProgram& p = sp.program;
    const sca::VariableLayout& var = sp.var;
    const sca::ConcaveObjective& obj = sp.obj;
    const sca::FeasibilityVariables& fv = sp.fv;

    StepResult r;
    auto ok = [](const conic::SolveResult& s) { return s.status == conic::Status::Optimal || s.status == conic::Status::AlmostOptimal; };
    r.solve = conic::solve(p, settings.conic);
    if (!ok(r.solve))
    {
        // One retry with the opposite equilibration choice, then one with looser tolerances.
        conic::Settings alt = settings.conic;
        alt.equilibrate = !alt.equilibrate;
        conic::SolveResult retry = conic::solve(p, alt);
        if (!ok(retry))
        {
            alt = settings.conic;
            alt.tol_gap = std::max(alt.tol_gap, 1e-6);
            alt.tol_feas = std::max(alt.tol_feas, 1e-6);
            retry = conic::solve(p, alt);
        }
        retry.wall_time += r.solve.wall_time;
        retry.iterations += r.solve.iterations;
        r.solve = std::move(retry);
    }
    if (!ok(r.solve)) return r;

    r.candidate = var.unpack(r.solve.primal);
    polish(r.candidate, ch, cfg);
    if (kind == StepKind::Feasibility)
    {
        for (int k = 0; k < cfg.K; ++k) r.sum_delta += std::max(0.0, r.solve.primal[fv.delta_c[k]]) + std::max(0.0, r.solve.primal[fv.delta_t[k]]);
    }
    else
    {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(p.num_vars());
        var.pack(cur.x_mat, cur.theta, v);
        r.surrogate_at_expansion = obj.evaluate(v);
        var.pack(r.candidate.x_mat, r.candidate.theta, v);
        r.surrogate_at_candidate = obj.evaluate(v);
    }
    r.usable = r.candidate.x_mat.allFinite() && r.candidate.theta.allFinite();
    return r;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Feasibility phase.

struct InitResult
{
    bool feasible = false;
    BeamformingSolution start;
    double sum_delta = std::numeric_limits<double>::infinity();
    IterationTrace trace;
    std::string diagnostics;
};

inline InitResult initialize(const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings,
                             const std::optional<BeamformingSolution>& custom_start = std::nullopt)
{
    config.validate();
    settings.validate();
    channels.validate(config);
    const ScaledProblem sp = settings.apply_scaling ? scale_problem(channels, config, settings.scale_epsilon)
                                                    : ScaledProblem{ScaleState{}, channels, config};
    const SystemConfig work = detail::tightened(sp.config, settings.feasibility_margin);

    InitResult out;
    BeamformingSolution cur = custom_start ? *custom_start : default_start(sp.channels, sp.config);
    cur.validate(config);
    out.trace.initial_gain = beampattern_gain(cur.x_mat, cur.theta, channels, config);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= settings.max_sca_iters; ++it)
    {
        detail::StepResult st = detail::sca_step(detail::StepKind::Feasibility, sp.channels, work, cur, 0.0, settings);
        if (!st.usable)
        {
            out.diagnostics = "feasibility subproblem " + std::to_string(it) + " ended with status " + std::string(conic::to_string(st.solve.status));
            break;
        }
        cur = st.candidate;
        const MetricReport rep = constraint_report(cur, channels, config);
        out.trace.records.push_back({it, 0, 0.0, -st.sum_delta, rep.beampattern_gain, rep.worst_residual(), st.solve.wall_time,
                                     st.solve.iterations, std::string(conic::to_string(st.solve.status))});
        out.sum_delta = st.sum_delta;
        if (st.sum_delta <= settings.feasibility_threshold && rep.feasible(settings.residual_tol))
        {
            out.feasible = true;
            break;
        }
        if (it > 1 && std::abs(prev - st.sum_delta) <= settings.sca_tolerance * std::max(prev, std::numeric_limits<double>::min())) break;
        prev = st.sum_delta;
    }
    out.start = cur;
    if (!out.feasible && out.diagnostics.empty())
        out.diagnostics = "slack sum stalled at " + std::to_string(out.sum_delta);
    return out;
}

// ---------------------------------------------------------------------------
// SCA drivers.

struct OptimizeResult
{
    BeamformingSolution solution;
    IterationTrace trace;
    bool converged = false;
    bool degraded = false; // a subproblem failed and the last feasible iterate was kept
    bool binding = true;   // passive only: unit-modulus test at the end
    double zeta = 0.0;     // final penalty weight (physical units)
    int escalations = 0;
    std::string note;
};

namespace detail {

// Starting pRIS penalty weight in solver units.
inline double penalty_weight(const ScaledProblem& sp, const SystemConfig& config, const SolverSettings& settings, const BeamformingSolution& cur)
{
    const double z_user = settings.zeta > 0.0 ? settings.zeta : config.zeta;
    if (z_user > 0.0) return z_user * sp.state.varsigma * sp.state.varsigma;
    double upper = 0.0;
    for (int n = 0; n < config.N; ++n) upper += std::abs(sp.channels.g_ris[n]) * sp.channels.g_mat.row(n).norm();
    upper = sp.config.p_max * upper * upper;
    const double g0 = beampattern_gain(cur.x_mat, cur.theta, sp.channels, sp.config);
    return 10.0 * std::max(g0, 1e-3 * upper) / config.N;
}

inline ScaledProblem working_problem(const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings)
{
    return settings.apply_scaling ? scale_problem(channels, config, settings.scale_epsilon) : ScaledProblem{ScaleState{}, channels, config};
}

inline OptimizeResult run_sca(StepKind kind, const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings,
                              const Eigen::MatrixXcd& x0, const Eigen::VectorXcd& theta0)
{
    config.validate();
    settings.validate();
    channels.validate(config);
    const ScaledProblem sp = working_problem(channels, config, settings);
    const double s2 = sp.state.varsigma * sp.state.varsigma;

    OptimizeResult out;
    BeamformingSolution cur{x0, theta0};
    cur.validate(config);
    out.trace.initial_gain = beampattern_gain(cur.x_mat, cur.theta, channels, config);

    double zeta = kind == StepKind::Passive ? penalty_weight(sp, config, settings, cur) : 0.0;

    const int stages = kind == StepKind::Passive ? settings.max_zeta_escalations + 1 : 1;
    int total_iters = 0;
    for (int stage = 0; stage < stages; ++stage)
    {
        int stage_iters = 0;
        bool stop_all = false;
        while (stage_iters < settings.max_sca_iters)
        {
            StepResult st = sca_step(kind, sp.channels, sp.config, cur, zeta, settings);
            if (!st.usable)
            {
                out.degraded = true;
                out.note = "subproblem status " + std::string(conic::to_string(st.solve.status)) + " at iteration " + std::to_string(total_iters + 1);
                stop_all = true;
                break;
            }
            const MetricReport rep = constraint_report(st.candidate, channels, config);
            // Accept only improving, feasible candidates; otherwise the iterate is stationary at solver precision.
            if (!rep.feasible(settings.residual_tol) || st.surrogate_at_candidate < st.surrogate_at_expansion)
            {
                if (!rep.feasible(settings.residual_tol)) out.note = "candidate rejected: residual " + std::to_string(rep.worst_residual());
                out.converged = true;
                break;
            }
            ++stage_iters;
            ++total_iters;
            cur = st.candidate;
            if (settings.keep_iterates) out.trace.iterates.push_back(cur);
            out.trace.records.push_back({total_iters, stage, zeta / s2, st.surrogate_at_candidate / s2, rep.beampattern_gain, rep.worst_residual(),
                                         st.solve.wall_time, st.solve.iterations, std::string(conic::to_string(st.solve.status))});
            const size_t n = out.trace.records.size();
            const double curg = out.trace.records[n - 1].true_gain;
            const double p0 = n >= 2 ? out.trace.records[n - 2].true_gain : out.trace.initial_gain;
            if (std::abs(curg - p0) <= settings.sca_tolerance * std::max(std::abs(p0), std::numeric_limits<double>::min()))
            {
                out.converged = true;
                break;
            }
        }
        if (stop_all) break;
        if (kind != StepKind::Passive) break;
        double dev = 0.0;
        for (int i = 0; i < cur.theta.size(); ++i) dev = std::max(dev, std::abs(1.0 - std::abs(cur.theta[i])));
        out.binding = dev <= settings.unit_modulus_tol;
        if (out.binding || stage + 1 == stages) break;
        zeta *= 10.0;
        ++out.escalations;
        out.converged = false;
    }
    if (kind == StepKind::Passive && !out.binding && out.note.empty()) out.note = "penalty not binding after escalations";
    out.solution = cur;
    out.zeta = zeta / s2;
    return out;
}

} // namespace detail

inline OptimizeResult optimize_aris(const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings,
                                    const Eigen::MatrixXcd& x0, const Eigen::VectorXcd& theta0)
{
    if (config.ris_mode != RisMode::Active) throw std::invalid_argument("optimize_aris: config is not in active mode");
    return detail::run_sca(detail::StepKind::Active, channels, config, settings, x0, theta0);
}

inline OptimizeResult optimize_pris(const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings,
                                    const Eigen::MatrixXcd& x0, const Eigen::VectorXcd& theta0)
{
    if (config.ris_mode != RisMode::Passive) throw std::invalid_argument("optimize_pris: config is not in passive mode");
    return detail::run_sca(detail::StepKind::Passive, channels, config, settings, x0, theta0);
}

struct RunResult
{
    bool feasible = false;
    InitResult init;
    OptimizeResult opt;
    MetricReport report;
};

// Feasibility phase followed by the driver for the configured mode.
inline RunResult run(const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings,
                     const std::optional<BeamformingSolution>& custom_start = std::nullopt)
{
    RunResult r;
    r.init = initialize(channels, config, settings, custom_start);
    if (!r.init.feasible) return r;
    r.feasible = true;
    r.opt = config.ris_mode == RisMode::Active ? optimize_aris(channels, config, settings, r.init.start.x_mat, r.init.start.theta)
                                               : optimize_pris(channels, config, settings, r.init.start.x_mat, r.init.start.theta);
    r.report = constraint_report(r.opt.solution, channels, config);
    return r;
}

// The SOCP of the first step from start, in solver units: the feasibility program when
// feasibility is set, else the optimization program of the configured mode. Start is in physical units.
inline conic::ConicProgram first_program(const ChannelSet& channels, const SystemConfig& config, const SolverSettings& settings,
                                         bool feasibility, const BeamformingSolution& start)
{
    config.validate();
    settings.validate();
    channels.validate(config);
    start.validate(config);
    const ScaledProblem sp = detail::working_problem(channels, config, settings);
    if (feasibility)
        return detail::build_subproblem(detail::StepKind::Feasibility, sp.channels, detail::tightened(sp.config, settings.feasibility_margin), start, 0.0)
            .program;
    const auto kind = config.ris_mode == RisMode::Active ? detail::StepKind::Active : detail::StepKind::Passive;
    const double zeta = kind == detail::StepKind::Passive ? detail::penalty_weight(sp, config, settings, start) : 0.0;
    return detail::build_subproblem(kind, sp.channels, sp.config, start, zeta).program;
}

} // namespace risbf
