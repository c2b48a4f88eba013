// SPDX-License-Identifier: Apache-2.0
// risbf: batch harness for single runs, seeded sweeps and the target-uncertainty experiment.

#include "risbf/conic/cbf.hpp"
#include "risbf/experiment.hpp"
#include "risbf/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

using namespace risbf;
namespace fs = std::filesystem;

namespace {

Scenario base_scenario(const std::string& config_path, bool full)
{
    Scenario s = config_path.empty() ? Scenario{} : load_scenario(config_path);
    return full ? full_scale(s) : s;
}

std::vector<RisMode> mode_filter(const std::string& m)
{
    if (m == "both") return {RisMode::Passive, RisMode::Active};
    return {parse_ris_mode(m)};
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed for '" + p.string() + "'");
}

int cmd_run(const std::string& config, bool full, int seed, const std::string& mode, const std::string& out)
{
    Scenario sc = base_scenario(config, full);
    if (!mode.empty()) sc.mode = parse_ris_mode(mode);
    const SystemConfig cfg = sc.system_config();
    const ChannelSet ch = sc.channels(static_cast<uint64_t>(seed));
    const RunResult r = run(ch, cfg, sc.solver);

    std::printf("mode %s  seed %d  N %d\n", to_string(sc.mode).c_str(), seed, cfg.N);
    if (!r.feasible)
    {
        std::printf("infeasible: %s (slack sum %.3g)\n", r.init.diagnostics.c_str(), r.init.sum_delta);
    }
    else
    {
        std::printf("gain %.6e W  iterations %zu  converged %d  worst residual %.3g\n", r.report.beampattern_gain,
                    r.opt.trace.records.size(), r.opt.converged, r.report.worst_residual());
        if (!r.opt.note.empty()) std::printf("note: %s\n", r.opt.note.c_str());
    }
    if (!out.empty())
    {
        fs::create_directories(out);
        save_channels(ch, (fs::path(out) / "channels.json").string());
        json j = {{"schema_version", kSchemaVersion},
                  {"seed", seed},
                  {"mode", to_string(sc.mode)},
                  {"feasible", r.feasible},
                  {"init_trace", trace_to_json(r.init.trace)},
                  {"init_sum_delta", r.init.sum_delta}};
        if (r.feasible)
        {
            j["trace"] = trace_to_json(r.opt.trace);
            j["solution"] = solution_to_json(r.opt.solution);
            j["report"] = report_to_json(r.report);
            j["converged"] = r.opt.converged;
            j["binding"] = r.opt.binding;
            j["zeta"] = r.opt.zeta;
        }
        write_text(fs::path(out) / "run.json", j.dump(1) + "\n");
        write_text(fs::path(out) / "scenario.cfg", write_scenario(sc));
    }
    return 0;
}

int cmd_sweep(const std::string& config, const std::string& sweep, bool full, const std::string& mode, int workers, const std::string& out,
              const std::string& format, bool uncertainty, int seeds_override, bool quiet)
{
    const Scenario base = base_scenario(config, full);
    SweepSpec spec = load_sweep(sweep, base);
    if (!mode.empty()) spec.modes = mode_filter(mode);
    if (seeds_override > 0) spec.seeds = seeds_override;
    if (full && seeds_override <= 0) spec.seeds = 100;
    if (uncertainty) spec.parameter = SweepParameter::TargetUncertaintyDeg;

    const auto progress = [&](const RunRow& r) {
        if (quiet) return;
        std::fprintf(stderr, "%s=%g seed %d %s: %s gain %.4e iters %d (%.1fs)\n", to_string(r.parameter).c_str(), r.value, r.seed,
                     to_string(r.mode).c_str(), r.status().c_str(), r.gain, r.sca_iterations, r.solve_time);
    };
    const SweepTable t = spec.parameter == SweepParameter::TargetUncertaintyDeg ? run_uncertainty_experiment(spec, workers, progress)
                                                                                : run_sweep(spec, workers, progress);
    const std::string stem = uncertainty || spec.parameter == SweepParameter::TargetUncertaintyDeg ? "uncertainty" : "sweep_" + to_string(spec.parameter);
    const EmittedFiles files = emit_outputs(t, out, parse_output_format(format), stem);
    write_text(fs::path(out) / (stem + "_scenario.cfg"), write_scenario(spec.base));
    std::printf("%s", aggregate_csv(t).c_str());
    std::printf("wrote %s, %s, %s\n", files.raw.string().c_str(), files.aggregate.string().c_str(), files.timing.string().c_str());
    if (!t.all_completed())
    {
        std::fprintf(stderr, "some runs raised errors; see the status column\n");
        return 2;
    }
    return 0;
}

int cmd_dump(const std::string& config, bool full, int seed, const std::string& mode, const std::string& out, bool feasibility)
{
    Scenario sc = base_scenario(config, full);
    if (!mode.empty()) sc.mode = parse_ris_mode(mode);
    const SystemConfig cfg = sc.system_config();
    const ChannelSet ch = sc.channels(static_cast<uint64_t>(seed));
    BeamformingSolution start = default_start(ch, cfg);
    if (!feasibility)
    {
        const InitResult init = initialize(ch, cfg, sc.solver);
        if (!init.feasible) throw std::runtime_error("no feasible start: " + init.diagnostics);
        start = init.start;
    }
    const conic::ConicProgram p = first_program(ch, cfg, sc.solver, feasibility, start);
    conic::write_cbf_file(p, out);
    std::printf("wrote %s (%d variables, %zu cone blocks)\n", out.c_str(), p.num_vars(), p.blocks().size());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"RIS-aided ISAC beamforming: runs, sweeps and plot data"};
    app.require_subcommand(1);

    std::string config, mode, out, sweep, format = "csv";
    int seed = 0, workers = 1, seeds = 0;
    bool full = false, feasibility = false, quiet = false;

    auto common = [&](CLI::App* c) {
        c->add_option("-c,--config", config, "scenario file (key = value)")->check(CLI::ExistingFile);
        c->add_flag("--full-scale", full, "full-scale preset (N = 100, 100 seeds)");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "one seeded run");
    common(run_cmd);
    run_cmd->add_option("-s,--seed", seed, "realization index")->check(CLI::NonNegativeNumber);
    run_cmd->add_option("-m,--mode", mode, "passive or active (default: from config)");
    run_cmd->add_option("-o,--out", out, "directory for channels, trace and solution JSON");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "seeded Monte-Carlo sweep");
    CLI::App* unc_cmd = app.add_subcommand("uncertainty", "target-location uncertainty experiment");
    for (CLI::App* c : {sweep_cmd, unc_cmd})
    {
        common(c);
        c->add_option("-S,--sweep", sweep, "sweep spec file")->required()->check(CLI::ExistingFile);
        c->add_option("-o,--out", out, "output directory")->required();
        c->add_option("-j,--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        c->add_option("-m,--mode", mode, "passive, active or both (default: from sweep spec)");
        c->add_option("-f,--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        c->add_option("--seeds", seeds, "override the seed count")->check(CLI::PositiveNumber);
        c->add_flag("-q,--quiet", quiet, "no per-run progress");
    }

    CLI::App* dump_cmd = app.add_subcommand("dump-program", "write the first SCA subproblem as CBF");
    common(dump_cmd);
    dump_cmd->add_option("-s,--seed", seed, "realization index")->check(CLI::NonNegativeNumber);
    dump_cmd->add_option("-m,--mode", mode, "passive or active");
    dump_cmd->add_option("-o,--out", out, "output .cbf path")->required();
    dump_cmd->add_flag("--feasibility", feasibility, "dump the feasibility-phase program instead");

    CLI11_PARSE(app, argc, argv);
    try
    {
        if (*run_cmd) return cmd_run(config, full, seed, mode, out);
        if (*sweep_cmd) return cmd_sweep(config, sweep, full, mode, workers, out, format, false, seeds, quiet);
        if (*unc_cmd) return cmd_sweep(config, sweep, full, mode, workers, out, format, true, seeds, quiet);
        if (*dump_cmd) return cmd_dump(config, full, seed, mode, out, feasibility);
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
