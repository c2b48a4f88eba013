// SPDX-License-Identifier: Apache-2.0
#pragma once

// Seeded Monte-Carlo sweeps over one scenario parameter, the target-uncertainty
// protocol, and CSV/JSON emission.

#include "io.hpp"
#include "optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace risbf {

inline constexpr int kSchemaVersion = 1;

enum class SweepParameter { N, PMaxDbm, GammaCDb, GammaTDb, K, TargetUncertaintyDeg };

inline std::string to_string(SweepParameter p)
{
    switch (p)
    {
    case SweepParameter::N: return "N";
    case SweepParameter::PMaxDbm: return "p_max_dbm";
    case SweepParameter::GammaCDb: return "gamma_c_db";
    case SweepParameter::GammaTDb: return "gamma_t_db";
    case SweepParameter::K: return "K";
    case SweepParameter::TargetUncertaintyDeg: return "target_uncertainty_deg";
    }
    return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& s)
{
    for (auto p : {SweepParameter::N, SweepParameter::PMaxDbm, SweepParameter::GammaCDb, SweepParameter::GammaTDb, SweepParameter::K,
                   SweepParameter::TargetUncertaintyDeg})
        if (s == to_string(p)) return p;
    throw std::invalid_argument("unknown sweep parameter '" + s + "'");
}

struct SweepSpec
{
    SweepParameter parameter = SweepParameter::N;
    std::vector<double> values;
    int seeds = 20;
    std::vector<RisMode> modes{RisMode::Passive, RisMode::Active};
    Scenario base;

    void validate() const
    {
        if (values.empty()) throw std::invalid_argument("SweepSpec: value list is empty");
        if (seeds < 1) throw std::invalid_argument("SweepSpec: seeds must be >= 1");
        if (modes.empty()) throw std::invalid_argument("SweepSpec: no RIS mode selected");
        for (double v : values)
        {
            if ((parameter == SweepParameter::N || parameter == SweepParameter::K) && (v != std::floor(v) || v < 1))
                throw std::invalid_argument("SweepSpec: " + to_string(parameter) + " values must be positive integers");
            if (parameter == SweepParameter::TargetUncertaintyDeg && !(v >= 0.0))
                throw std::invalid_argument("SweepSpec: uncertainty half-width must be >= 0");
        }
        base.validate();
    }
};

// Keys: parameter, values, seeds, modes. Scenario keys are accepted too and override the base.
inline SweepSpec parse_sweep(std::istream& is, const Scenario& base, const std::string& source = "<sweep>")
{
    const KeyValues kv = parse_key_values(is, source);
    SweepSpec s;
    s.base = base;
    for (size_t n = 0; n < kv.entries.size(); ++n)
    {
        const auto& [key, val] = kv.entries[n];
        const std::string ctx = source + ":" + std::to_string(kv.lines[n]) + ": " + key;
        if (key == "parameter")
            s.parameter = parse_sweep_parameter(val);
        else if (key == "values")
            s.values = detail::parse_list(val, ctx);
        else if (key == "seeds")
            s.seeds = static_cast<int>(detail::parse_int(val, ctx));
        else if (key == "modes")
        {
            s.modes.clear();
            for (const auto& m : detail::split(val, ',')) s.modes.push_back(parse_ris_mode(m));
        }
        else if (!apply_scenario_key(s.base, key, val, ctx))
            throw std::invalid_argument(ctx + ": unknown key");
    }
    s.validate();
    return s;
}

inline SweepSpec load_sweep(const std::string& path, const Scenario& base)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open sweep spec '" + path + "'");
    return parse_sweep(f, base, path);
}

inline Scenario apply_value(Scenario s, SweepParameter p, double v)
{
    switch (p)
    {
    case SweepParameter::N: s.N = static_cast<int>(v); break;
    case SweepParameter::PMaxDbm: s.p_max_dbm = v; break;
    case SweepParameter::GammaCDb: s.gamma_c_db = {v}; break;
    case SweepParameter::GammaTDb: s.gamma_t_db = {v}; break;
    case SweepParameter::K: s.K = static_cast<int>(v); break;
    case SweepParameter::TargetUncertaintyDeg: break;
    }
    return s;
}

struct RunRow
{
    SweepParameter parameter = SweepParameter::N;
    double value = 0.0;
    int seed = 0;
    RisMode mode = RisMode::Active;
    bool feasible = false;
    double gain = 0.0;         // evaluated gain, 0 when infeasible
    double reference_gain = 0.0; // uncertainty runs: gain of a design made with the true angles; else = gain
    double degradation = 0.0;    // 1 - gain / reference_gain
    int sca_iterations = 0;
    bool converged = false;
    bool binding = true;
    double worst_residual = 0.0;
    double total_power = 0.0;
    std::string error; // nonempty when the run threw

    // Not part of the raw table (wall-clock).
    double solve_time = 0.0;
    long solver_iterations = 0;

    std::string status() const { return !error.empty() ? "error" : feasible ? "ok" : "infeasible"; }
};

namespace detail {

// Uniform in [-1, 1), a pure function of its inputs.
inline double unit_offset(uint64_t experiment, int seed, uint64_t stream)
{
    const uint64_t x = splitmix64(realization_seed(experiment ^ 0x5eedu, static_cast<uint64_t>(seed)) + stream);
    return 2.0 * static_cast<double>(x >> 11) * 0x1.0p-53 - 1.0;
}

inline void fill_from_run(RunRow& row, const RunResult& r)
{
    row.feasible = r.feasible;
    row.sca_iterations = static_cast<int>(r.opt.trace.records.size());
    row.converged = r.opt.converged;
    row.binding = r.opt.binding;
    for (const auto& rec : r.init.trace.records) row.solver_iterations += rec.solver_iterations;
    for (const auto& rec : r.opt.trace.records) row.solver_iterations += rec.solver_iterations;
}

} // namespace detail

// Target angle offsets (degrees) for a seed at half-width w; the draw is shared across widths.
inline std::pair<double, double> target_offsets(const Scenario& base, int seed, double half_width_deg)
{
    return {half_width_deg * detail::unit_offset(base.experiment, seed, 1), half_width_deg * detail::unit_offset(base.experiment, seed, 2)};
}

namespace detail {

inline RunRow make_row(SweepParameter p, double value, int seed, RisMode mode)
{
    RunRow row;
    row.parameter = p;
    row.value = value;
    row.seed = seed;
    row.mode = mode;
    return row;
}

inline void evaluate_row(RunRow& row, const RunResult& r)
{
    fill_from_run(row, r);
    if (!r.feasible) return;
    row.gain = row.reference_gain = r.report.beampattern_gain;
    row.worst_residual = r.report.worst_residual();
    row.total_power = r.report.total_power;
}

inline ChannelSet true_channels(const Scenario& sc, const SystemConfig& cfg, int seed, double half_width_deg)
{
    const auto [daz, del] = target_offsets(sc, seed, half_width_deg);
    return generate_channels(cfg, perturb_target_angles(sc.geometry, daz, del), sc.propagation, realization_seed(sc.experiment, seed));
}

// design: optimized on the estimated angles; reference: optimized on the true ones.
inline void evaluate_uncertainty_row(RunRow& row, const SystemConfig& cfg, const RunResult& design, const ChannelSet& ch_true,
                                     const RunResult& reference)
{
    fill_from_run(row, design);
    row.feasible = design.feasible && reference.feasible;
    if (!row.feasible) return;
    const MetricReport rep = constraint_report(design.opt.solution, ch_true, cfg);
    row.gain = rep.beampattern_gain;
    row.worst_residual = rep.worst_residual();
    row.total_power = rep.total_power;
    row.reference_gain = reference.report.beampattern_gain;
    row.degradation = 1.0 - row.gain / row.reference_gain;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// One (value, seed, mode) point: scene -> initialize -> optimize -> report.
inline RunRow run_point(const Scenario& base, SweepParameter p, double value, int seed, RisMode mode)
{
    RunRow row = detail::make_row(p, value, seed, mode);
    const auto t0 = std::chrono::steady_clock::now();
    try
    {
        const Scenario sc = apply_value(base, p, value);
        const SystemConfig cfg = sc.system_config(mode);
        const RunResult r = run(sc.channels(static_cast<uint64_t>(seed)), cfg, sc.solver);
        if (p != SweepParameter::TargetUncertaintyDeg)
            detail::evaluate_row(row, r);
        else if (value == 0.0)
            detail::evaluate_uncertainty_row(row, cfg, r, sc.channels(static_cast<uint64_t>(seed)), r);
        else
        {
            const ChannelSet ch_true = detail::true_channels(sc, cfg, seed, value);
            detail::evaluate_uncertainty_row(row, cfg, r, ch_true, run(ch_true, cfg, sc.solver));
        }
    }
    catch (const std::exception& e)
    {
        row.error = e.what();
        row.feasible = false;
    }
    row.solve_time = detail::seconds_since(t0);
    return row;
}

// Parallel map over [0, n); results land at their own index.
template <class Fn>
void parallel_for(size_t n, int workers, Fn&& fn)
{
    const size_t w = std::max<size_t>(1, std::min<size_t>(n, static_cast<size_t>(std::max(1, workers))));
    std::atomic<size_t> next{0};
    auto body = [&] {
        for (size_t i = next++; i < n; i = next++) fn(i);
    };
    if (w == 1)
    {
        body();
        return;
    }
    std::vector<std::thread> pool;
    for (size_t t = 0; t < w; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
}

inline bool row_less(const RunRow& a, const RunRow& b)
{
    return std::tuple(a.value, static_cast<int>(a.mode), a.seed) < std::tuple(b.value, static_cast<int>(b.mode), b.seed);
}

struct SweepTable
{
    SweepParameter parameter = SweepParameter::N;
    std::vector<RunRow> rows; // sorted by (value, mode, seed)

    bool all_completed() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const RunRow& r) { return r.error.empty(); });
    }
};

using ProgressFn = std::function<void(const RunRow&)>;

inline SweepTable run_uncertainty_experiment(SweepSpec spec, int workers = 1, const ProgressFn& progress = {});

inline SweepTable run_sweep(const SweepSpec& spec, int workers = 1, const ProgressFn& progress = {})
{
    if (spec.parameter == SweepParameter::TargetUncertaintyDeg) return run_uncertainty_experiment(spec, workers, progress);
    spec.validate();
    std::vector<std::tuple<double, int, RisMode>> jobs;
    for (double v : spec.values)
        for (RisMode m : spec.modes)
            for (int s = 0; s < spec.seeds; ++s) jobs.emplace_back(v, s, m);

    SweepTable t;
    t.parameter = spec.parameter;
    t.rows.resize(jobs.size());
    std::mutex mu;
    parallel_for(jobs.size(), workers, [&](size_t i) {
        const auto& [v, s, m] = jobs[i];
        t.rows[i] = run_point(spec.base, spec.parameter, v, s, m);
        if (progress)
        {
            std::lock_guard lock(mu);
            progress(t.rows[i]);
        }
    });
    std::sort(t.rows.begin(), t.rows.end(), row_less);
    return t;
}

// The design does not depend on the half-width, so each (seed, mode) designs once and is evaluated
// at every width against a reference designed on the true channels; rows match run_point exactly.
inline SweepTable run_uncertainty_experiment(SweepSpec spec, int workers, const ProgressFn& progress)
{
    spec.parameter = SweepParameter::TargetUncertaintyDeg;
    spec.validate();
    std::vector<std::pair<int, RisMode>> jobs;
    for (RisMode m : spec.modes)
        for (int s = 0; s < spec.seeds; ++s) jobs.emplace_back(s, m);

    SweepTable t;
    t.parameter = spec.parameter;
    const size_t nv = spec.values.size();
    t.rows.resize(jobs.size() * nv);
    std::mutex mu;
    parallel_for(jobs.size(), workers, [&](size_t i) {
        const auto [seed, mode] = jobs[i];
        const auto t0 = std::chrono::steady_clock::now();
        std::string error;
        std::optional<RunResult> r;
        SystemConfig cfg;
        try
        {
            cfg = spec.base.system_config(mode);
            r = run(spec.base.channels(static_cast<uint64_t>(seed)), cfg, spec.base.solver);
        }
        catch (const std::exception& e)
        {
            error = e.what();
        }
        const double wall = detail::seconds_since(t0);
        for (size_t v = 0; v < nv; ++v)
        {
            RunRow& row = t.rows[i * nv + v];
            const double w = spec.values[v];
            row = detail::make_row(spec.parameter, w, seed, mode);
            const auto tv = std::chrono::steady_clock::now();
            try
            {
                if (!r) throw std::runtime_error(error);
                if (w == 0.0)
                    detail::evaluate_uncertainty_row(row, cfg, *r, spec.base.channels(static_cast<uint64_t>(seed)), *r);
                else
                {
                    const ChannelSet ch_true = detail::true_channels(spec.base, cfg, seed, w);
                    detail::evaluate_uncertainty_row(row, cfg, *r, ch_true, run(ch_true, cfg, spec.base.solver));
                }
            }
            catch (const std::exception& e)
            {
                row.error = e.what();
                row.feasible = false;
            }
            row.solve_time = wall + detail::seconds_since(tv);
            if (progress)
            {
                std::lock_guard lock(mu);
                progress(row);
            }
        }
    });
    std::sort(t.rows.begin(), t.rows.end(), row_less);
    return t;
}

// Recomputes one row from its (value, seed, mode).
inline RunRow replay(const Scenario& base, const RunRow& row) { return run_point(base, row.parameter, row.value, row.seed, row.mode); }

struct Aggregate
{
    double value = 0.0;
    RisMode mode = RisMode::Active;
    int runs = 0;
    int feasible = 0;
    int converged = 0;
    double mean_gain = 0.0;   // infeasible runs count as 0
    double median_gain = 0.0; // same population
    double mean_gain_feasible = 0.0;
    double median_degradation = 0.0; // feasible runs only
    double mean_iterations = 0.0;    // feasible runs only
};

inline double median_of(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sums run in row order so an external recomputation can match bit for bit.
inline std::vector<Aggregate> aggregate(const SweepTable& t)
{
    std::vector<Aggregate> out;
    size_t i = 0;
    while (i < t.rows.size())
    {
        size_t j = i;
        while (j < t.rows.size() && t.rows[j].value == t.rows[i].value && t.rows[j].mode == t.rows[i].mode) ++j;
        Aggregate a;
        a.value = t.rows[i].value;
        a.mode = t.rows[i].mode;
        std::vector<double> gains, degr;
        double sum = 0.0, sum_f = 0.0, iters = 0.0;
        for (size_t r = i; r < j; ++r)
        {
            const RunRow& row = t.rows[r];
            ++a.runs;
            gains.push_back(row.gain);
            sum += row.gain;
            a.converged += row.converged;
            if (row.feasible)
            {
                ++a.feasible;
                sum_f += row.gain;
                iters += row.sca_iterations;
                degr.push_back(row.degradation);
            }
        }
        a.mean_gain = sum / a.runs;
        a.median_gain = median_of(gains);
        a.mean_gain_feasible = a.feasible ? sum_f / a.feasible : 0.0;
        a.median_degradation = median_of(degr);
        a.mean_iterations = a.feasible ? iters / a.feasible : 0.0;
        out.push_back(a);
        i = j;
    }
    return out;
}

// ---- emission ----

enum class OutputFormat { Csv, Json };

inline OutputFormat parse_output_format(const std::string& s)
{
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    throw std::invalid_argument("unknown output format '" + s + "'");
}

inline const char* raw_csv_header()
{
    return "parameter,value,seed,mode,status,feasible,gain,reference_gain,degradation,sca_iterations,converged,binding,worst_residual,"
           "total_power";
}

inline const char* aggregate_csv_header()
{
    return "parameter,value,mode,runs,feasible,converged,mean_gain,median_gain,mean_gain_feasible,median_degradation,mean_iterations";
}

inline std::string raw_csv(const SweepTable& t)
{
    using detail::fmt;
    std::ostringstream os;
    os << "# risbf sweep raw, schema " << kSchemaVersion << '\n' << raw_csv_header() << '\n';
    for (const auto& r : t.rows)
        os << to_string(r.parameter) << ',' << fmt(r.value) << ',' << r.seed << ',' << to_string(r.mode) << ',' << r.status() << ','
           << r.feasible << ',' << fmt(r.gain) << ',' << fmt(r.reference_gain) << ',' << fmt(r.degradation) << ',' << r.sca_iterations
           << ',' << r.converged << ',' << r.binding << ',' << fmt(r.worst_residual) << ',' << fmt(r.total_power) << '\n';
    return os.str();
}

inline std::string aggregate_csv(const SweepTable& t)
{
    using detail::fmt;
    std::ostringstream os;
    os << "# risbf sweep aggregate, schema " << kSchemaVersion << '\n' << aggregate_csv_header() << '\n';
    for (const auto& a : aggregate(t))
        os << to_string(t.parameter) << ',' << fmt(a.value) << ',' << to_string(a.mode) << ',' << a.runs << ',' << a.feasible << ','
           << a.converged << ',' << fmt(a.mean_gain) << ',' << fmt(a.median_gain) << ',' << fmt(a.mean_gain_feasible) << ','
           << fmt(a.median_degradation) << ',' << fmt(a.mean_iterations) << '\n';
    return os.str();
}

inline json raw_json(const SweepTable& t)
{
    json rows = json::array();
    for (const auto& r : t.rows)
    {
        json j = {{"value", r.value},
                  {"seed", r.seed},
                  {"mode", to_string(r.mode)},
                  {"status", r.status()},
                  {"feasible", r.feasible},
                  {"gain", r.gain},
                  {"reference_gain", r.reference_gain},
                  {"degradation", r.degradation},
                  {"sca_iterations", r.sca_iterations},
                  {"converged", r.converged},
                  {"binding", r.binding},
                  {"worst_residual", r.worst_residual},
                  {"total_power", r.total_power}};
        if (!r.error.empty()) j["error"] = r.error;
        rows.push_back(std::move(j));
    }
    return {{"schema_version", kSchemaVersion}, {"kind", "raw"}, {"parameter", to_string(t.parameter)}, {"rows", rows}};
}

inline json aggregate_json(const SweepTable& t)
{
    json rows = json::array();
    for (const auto& a : aggregate(t))
        rows.push_back({{"value", a.value},
                        {"mode", to_string(a.mode)},
                        {"runs", a.runs},
                        {"feasible", a.feasible},
                        {"converged", a.converged},
                        {"mean_gain", a.mean_gain},
                        {"median_gain", a.median_gain},
                        {"mean_gain_feasible", a.mean_gain_feasible},
                        {"median_degradation", a.median_degradation},
                        {"mean_iterations", a.mean_iterations}});
    return {{"schema_version", kSchemaVersion}, {"kind", "aggregate"}, {"parameter", to_string(t.parameter)}, {"rows", rows}};
}

// Wall-clock table; kept apart so the raw file stays reproducible byte for byte.
inline std::string timing_csv(const SweepTable& t)
{
    std::ostringstream os;
    os << "# risbf sweep timing, schema " << kSchemaVersion << "\nparameter,value,seed,mode,wall_seconds,sca_iterations,solver_iterations\n";
    for (const auto& r : t.rows)
        os << to_string(r.parameter) << ',' << detail::fmt(r.value) << ',' << r.seed << ',' << to_string(r.mode) << ','
           << detail::fmt(r.solve_time) << ',' << r.sca_iterations << ',' << r.solver_iterations << '\n';
    return os.str();
}

struct EmittedFiles
{
    std::filesystem::path raw, aggregate, timing;
};

// Writes <stem>_raw, <stem>_aggregate (csv or json) and <stem>_timing.csv under dir.
inline EmittedFiles emit_outputs(const SweepTable& t, const std::filesystem::path& dir, OutputFormat format,
                                 const std::string& stem = "sweep")
{
    if (t.rows.empty()) throw std::invalid_argument("emit_outputs: empty table, nothing written");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("emit_outputs: cannot create '" + dir.string() + "': " + ec.message());

    const std::string ext = format == OutputFormat::Csv ? ".csv" : ".json";
    EmittedFiles f{dir / (stem + "_raw" + ext), dir / (stem + "_aggregate" + ext), dir / (stem + "_timing.csv")};
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("emit_outputs: cannot open '" + p.string() + "' for writing");
        os << text;
        if (!os) throw std::runtime_error("emit_outputs: write failed for '" + p.string() + "'");
    };
    if (format == OutputFormat::Csv)
    {
        write(f.raw, raw_csv(t));
        write(f.aggregate, aggregate_csv(t));
    }
    else
    {
        write(f.raw, raw_json(t).dump(1) + "\n");
        write(f.aggregate, aggregate_json(t).dump(1) + "\n");
    }
    write(f.timing, timing_csv(t));
    return f;
}

// Reads a raw CSV written by raw_csv (for replay).
inline SweepTable read_raw_csv(std::istream& is, const std::string& source = "<raw>")
{
    SweepTable t;
    std::string line;
    bool header = false;
    int no = 0;
    while (std::getline(is, line))
    {
        ++no;
        if (line.empty() || line[0] == '#') continue;
        if (!header)
        {
            if (line != raw_csv_header()) throw std::invalid_argument(source + ": unexpected header");
            header = true;
            continue;
        }
        const auto c = detail::split(line, ',');
        if (c.size() != 14) throw std::invalid_argument(source + ":" + std::to_string(no) + ": expected 14 columns");
        const std::string ctx = source + ":" + std::to_string(no);
        RunRow r;
        r.parameter = parse_sweep_parameter(c[0]);
        r.value = detail::parse_double(c[1], ctx);
        r.seed = static_cast<int>(detail::parse_int(c[2], ctx));
        r.mode = parse_ris_mode(c[3]);
        if (c[4] == "error") r.error = "error";
        r.feasible = c[5] == "1";
        r.gain = detail::parse_double(c[6], ctx);
        r.reference_gain = detail::parse_double(c[7], ctx);
        r.degradation = detail::parse_double(c[8], ctx);
        r.sca_iterations = static_cast<int>(detail::parse_int(c[9], ctx));
        r.converged = c[10] == "1";
        r.binding = c[11] == "1";
        r.worst_residual = detail::parse_double(c[12], ctx);
        r.total_power = detail::parse_double(c[13], ctx);
        t.parameter = r.parameter;
        t.rows.push_back(std::move(r));
    }
    return t;
}

} // namespace risbf
