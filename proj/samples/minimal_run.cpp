// Smallest end-to-end use of the library: one scene, one active-RIS run.
#include "risbf/optimizer.hpp"

#include <cstdio>

int main()
{
    using namespace risbf;
    SystemConfig cfg = SystemConfig::uniform(4, 3, 4, 16, dbm_to_watt(40), db_to_linear(10), db_to_linear(0), dbm_to_watt(-80),
                                             dbm_to_watt(-80));
    cfg.set_mode(RisMode::Active, 4.0, dbm_to_watt(-80));

    const ChannelSet ch = generate_channels(cfg, SceneGeometry{}, PropagationModel{}, realization_seed(1, 0));
    const RunResult r = run(ch, cfg, SolverSettings{});
    if (!r.feasible)
    {
        std::printf("infeasible: %s\n", r.init.diagnostics.c_str());
        return 1;
    }
    std::printf("beampattern gain %.4e W after %zu iterations\n", r.report.beampattern_gain, r.opt.trace.records.size());
    for (int k = 0; k < cfg.K; ++k)
        std::printf("user %d: SINR %.2f dB, leakage %.2f dB\n", k, linear_to_db(r.report.user_sinr[k]), linear_to_db(r.report.leakage_sinr[k]));
    return 0;
}
