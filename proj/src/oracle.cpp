#include "mz/oracle.hpp"
#include "mz/linalg.hpp"

#include <cmath>

namespace mz {

PropagatorCache::PropagatorCache(TimeGrid grid, std::vector<Mat> increments) : grid_(grid), inc_(std::move(increments))
{
    if (static_cast<int>(inc_.size()) != grid_.NT) throw ShapeError("propagator cache needs N_T increments");
}

Mat PropagatorCache::E(int n, int k) const
{
    if (k > n) throw std::invalid_argument("propagator: E(t_n, t_k) needs n >= k");
    if (n > grid_.NT || k < 0) throw std::out_of_range("propagator: node outside grid");
    const int dt = inc_.empty() ? 0 : static_cast<int>(inc_.front().rows());
    Mat out = Mat::Identity(dt, dt);
    for (int i = k; i < n; ++i) out = inc_[i] * out;
    return out;
}

PropagatorCache build_propagator(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& grid, double solver_tol)
{
    const double dt = grid.dt();
    std::vector<Mat> inc(grid.NT);
    if (sys.time_invariant) {
        Mat E1 = expm(dt * extract_blocks(sys.A(0.0), proj).Ut);
        for (auto& m : inc) m = E1;
        return PropagatorCache(grid, inc);
    }
    auto rhs = [&](double t, const Mat& X) -> Mat { return extract_blocks(sys.A(t), proj).Ut * X; };
    Rk4Control ctl{solver_tol, 1 << 16, 1};
    const Mat I = Mat::Identity(proj.d_tilde(), proj.d_tilde());
    for (int n = 0; n < grid.NT; ++n) inc[n] = rk4_interval(rhs, grid.t(n), grid.t(n + 1), I, ctl);
    return PropagatorCache(grid, inc);
}

OperatorSequence exact_operators_time_invariant(const SystemSpec& sys, const ProjectionSpec& proj,
                                                const TimeGrid& grid, Scheme scheme)
{
    if (!sys.time_invariant) throw std::invalid_argument("exact operators need a time-invariant system");
    Blocks b = extract_blocks(sys.A(0.0), proj);
    const double dt = grid.dt();
    const int NT = grid.NT;
    OperatorSequence ops;
    ops.grid = grid;
    ops.scheme = scheme;
    ops.R.assign(NT, b.R);
    ops.Rtilde.assign(NT, b.Rt);
    ops.K.resize(NT);
    ops.B.resize(NT);
    Mat step = expm(dt * b.Ut);
    Mat Ek = Mat::Identity(proj.d_tilde(), proj.d_tilde());
    Mat Eb = expm(node_offset(scheme) * dt * b.Ut);
    for (int n = 0; n < NT; ++n) {
        ops.K[n] = b.Rt * Ek * b.U;
        ops.B[n] = b.Rt * Eb;
        Ek = step * Ek;
        Eb = step * Eb;
    }
    return ops;
}

Mat nonstationary_kernel(const SystemSpec& sys, const ProjectionSpec& proj, const PropagatorCache& cache, int n, int k)
{
    if (k > n) throw std::invalid_argument("nonstationary_kernel: s > t");
    const auto& g = cache.grid();
    Blocks bt = extract_blocks(sys.A(g.t(n)), proj);
    Blocks bs = extract_blocks(sys.A(g.t(k)), proj);
    return bt.Rt * cache.E(n, k) * bs.U;
}

std::vector<Mat> markovian_reference(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& grid, Scheme scheme)
{
    std::vector<Mat> R(grid.NT);
    const double off = node_offset(scheme);
    for (int n = 0; n < grid.NT; ++n) R[n] = extract_blocks(sys.A(grid.t(n + off)), proj).R;
    return R;
}

namespace {

void require_wave(const SystemSpec& sys)
{
    if (sys.label.rfind("wave:", 0) != 0) throw std::invalid_argument("closed-form wave operators need a wave system");
}

}  // namespace

Mat wave_R(const SystemSpec& sys, double t)
{
    require_wave(sys);
    const int N = sys.grid_N;
    return -sys.params.at("gamma1")(t) * Mat::Identity(N, N);
}

Mat wave_B(const SystemSpec& sys, double t)
{
    require_wave(sys);
    const int N = sys.grid_N;
    return std::exp(-sys.params.at("Gamma")(t)) * Mat::Identity(N, N);
}

Mat wave_K(const SystemSpec& sys, double t, double s)
{
    require_wave(sys);
    const int N = sys.grid_N;
    const auto& Gam = sys.params.at("Gamma");
    // The constant term holds c^2 D2 in its lower-left block.
    return std::exp(-(Gam(t) - Gam(s))) * sys.terms.front().M.bottomLeftCorner(N, N);
}

}  // namespace mz
