#pragma once

#include "mz/dynamics.hpp"

namespace mz {

// Per-interval propagators of the unresolved block, E(t_{n+1}, t_n).
class PropagatorCache {
public:
    PropagatorCache(TimeGrid grid, std::vector<Mat> increments);

    const TimeGrid& grid() const { return grid_; }
    // E(t_n, t_k) for n >= k.
    Mat E(int n, int k) const;

private:
    TimeGrid grid_;
    std::vector<Mat> inc_;
};

PropagatorCache build_propagator(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& grid,
                                 double solver_tol = 1e-12);

// R constant, K(j dt) = Rt e^{Ut j dt} U, B(t) = Rt e^{Ut t} at the scheme's R/B nodes.
OperatorSequence exact_operators_time_invariant(const SystemSpec& sys, const ProjectionSpec& proj,
                                                const TimeGrid& grid, Scheme scheme);

// K(t_n, t_k) = Rt(t_n) E(t_n, t_k) U(t_k).
Mat nonstationary_kernel(const SystemSpec& sys, const ProjectionSpec& proj, const PropagatorCache& cache, int n, int k);

// Resolved block of A at the scheme's R nodes.
std::vector<Mat> markovian_reference(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& grid, Scheme scheme);

// Closed forms for the damped wave family with the first-N split.
Mat wave_R(const SystemSpec& sys, double t);
Mat wave_B(const SystemSpec& sys, double t);
Mat wave_K(const SystemSpec& sys, double t, double s);

}  // namespace mz
