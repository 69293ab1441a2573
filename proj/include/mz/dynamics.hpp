#pragma once

#include "mz/state_space.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>

namespace mz {

using ScalarFn = std::function<double(double)>;

struct DiffMatrices {
    Mat D, D2;
};

// Fourier collocation on x_j = 2 pi j / N with wavenumbers -N/2+1..N/2.
// The odd-derivative Nyquist term is not real and is dropped; by default D2
// is D*D, which drops the Nyquist mode consistently. literal_d2 keeps the
// -(N/2)^2 Nyquist entry instead.
DiffMatrices spectral_diff_matrices(int N, bool literal_d2 = false);

// A(t) = sum_i c_i(t) M_i. Forcing is base(t) + scale(t) * u0 for the
// trajectory started at u0; either part may be absent.
struct SystemSpec {
    struct Term {
        Mat M;
        ScalarFn c;
    };

    int N = 0;
    std::string label;
    bool time_invariant = true;
    std::vector<Term> terms;
    std::function<Vec(double)> forcing_base;
    ScalarFn forcing_scale;
    std::map<std::string, ScalarFn> params;
    double c = 0.0;              // wave speed
    int grid_N = 0;              // spatial grid size used by the generators
    ProjectionSpec default_projection;

    Mat A(double t) const;
    bool base_constant = false;  // forcing_base does not depend on t

    bool forced() const { return static_cast<bool>(forcing_base) || static_cast<bool>(forcing_scale); }
    bool forcing_constant() const { return forced() && !forcing_scale && base_constant; }
    Vec g(double t, const Vec& u0) const;
};

SystemSpec build_rda_system(char which, int N = 30, bool literal_d2 = false);
SystemSpec build_wave_system(char which, int N = 60, bool literal_d2 = false);

// Two-dimensional rotation u' = [[0,1],[-1,0]] u with resolved {0}.
SystemSpec rotation_system();

// Generic time-invariant linear system with explicit projection.
SystemSpec constant_system(const Mat& A, const ProjectionSpec& proj, const std::string& label = "constant");

// "rda:a".."rda:h", "wave:a".."wave:c", "rotation".
SystemSpec build_system(const std::string& label, int N = 0, bool literal_d2 = false);

struct EnsembleGenConfig {
    int Ns = 1;
    std::uint64_t seed = 0;
    double solver_tol = 1e-12;
    int substep_cap = 1 << 16;
    bool force_rk4 = false;
    int threads = 1;
};

// Rows sum_{m=0}^{N/2} a_m / (1 + m^2) cos(m x - phi_m).
Mat sample_initial_conditions(int N, int Ns, std::uint64_t seed);
Mat sample_initial_conditions(int N, int Ns, std::mt19937_64& rng);

// Initial conditions matching the system: one sampled block for rda, two
// independent blocks [u0 | aux0] for the wave system.
Mat sample_system_initial_conditions(const SystemSpec& sys, int Ns, std::uint64_t seed);

// Full-state trajectories, one Ns x N matrix per node.
std::vector<Mat> integrate_full(const SystemSpec& sys, const TimeGrid& grid, const Mat& F0, const EnsembleGenConfig& cfg);

SnapshotEnsemble integrate_ensemble(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& grid,
                                    const Mat& F0, const EnsembleGenConfig& cfg);

SnapshotEnsemble mask_partial(const SnapshotEnsemble& ens);

// Keeps every stride-th node up to NT_coarse (default N_T / stride). Half-node
// forcing on the coarse grid is read off the fine nodes, so stride must be
// even when forcing is present.
SnapshotEnsemble subsample(const SnapshotEnsemble& ens, int stride, int NT_coarse = -1);

// Controlled RK4 over one interval for dx/dt = f(t, x).
struct Rk4Control {
    double tol = 1e-12;
    int cap = 1 << 16;
    int substeps = 1;  // carried between calls
};
Mat rk4_interval(const std::function<Mat(double, const Mat&)>& f, double t0, double t1, const Mat& x0, Rk4Control& ctl);

}  // namespace mz
