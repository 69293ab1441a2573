#pragma once

#include "mz/dynamics.hpp"

namespace mz::testing {

inline SnapshotEnsemble make_ensemble(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& g, int Ns,
                                      std::uint64_t seed)
{
    EnsembleGenConfig cfg;
    cfg.Ns = Ns;
    cfg.seed = seed;
    Mat F0 = sys.N % 2 == 0 ? sample_system_initial_conditions(sys, Ns, seed) : Mat(Mat::Random(Ns, sys.N));
    return integrate_ensemble(sys, proj, g, F0, cfg);
}

inline SnapshotEnsemble make_ensemble(const SystemSpec& sys, const TimeGrid& g, int Ns, std::uint64_t seed)
{
    return make_ensemble(sys, sys.default_projection, g, Ns, seed);
}

}  // namespace mz::testing
