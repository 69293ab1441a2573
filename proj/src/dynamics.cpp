#include "mz/dynamics.hpp"
#include "mz/linalg.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <thread>

namespace mz {

namespace {

constexpr double kPi = std::numbers::pi;

ScalarFn constant(double v)
{
    return [v](double) { return v; };
}

void add_term(SystemSpec& sys, const Mat& M, ScalarFn c)
{
    sys.terms.push_back({M, std::move(c)});
}

}  // namespace

DiffMatrices spectral_diff_matrices(int N, bool literal_d2)
{
    if (N < 4 || N % 2 != 0) throw std::invalid_argument("spectral_diff_matrices: N must be even and >= 4");
    // D_jl = (1/N) sum_k (ik) e^{ik(x_j - x_l)}, built through the complex sum
    // and then checked to be real once the Nyquist odd term is removed.
    using C = std::complex<double>;
    Eigen::MatrixXcd Dc = Eigen::MatrixXcd::Zero(N, N), D2c = Eigen::MatrixXcd::Zero(N, N);
    for (int j = 0; j < N; ++j) {
        for (int l = 0; l < N; ++l) {
            double dx = 2.0 * kPi * (j - l) / N;
            C s1 = 0.0, s2 = 0.0;
            for (int k = -N / 2 + 1; k <= N / 2; ++k) {
                C e = std::exp(C(0.0, k * dx));
                if (k != N / 2) s1 += C(0.0, k) * e;
                s2 += -double(k) * double(k) * e;
            }
            Dc(j, l) = s1 / double(N);
            D2c(j, l) = s2 / double(N);
        }
    }
    if (Dc.imag().cwiseAbs().maxCoeff() > 1e-12 * N * N || D2c.imag().cwiseAbs().maxCoeff() > 1e-12 * N * N)
        throw NumericalError("spectral_diff_matrices: imaginary residue above tolerance");
    DiffMatrices out;
    out.D = Dc.real();
    out.D2 = literal_d2 ? Mat(D2c.real()) : Mat(out.D * out.D);
    return out;
}

Mat SystemSpec::A(double t) const
{
    Mat out = Mat::Zero(N, N);
    for (const auto& term : terms) out.noalias() += term.c(t) * term.M;
    return out;
}

Vec SystemSpec::g(double t, const Vec& u0) const
{
    Vec out = Vec::Zero(N);
    if (forcing_base) out += forcing_base(t);
    if (forcing_scale) out += forcing_scale(t) * u0;
    return out;
}

SystemSpec build_rda_system(char which, int N, bool literal_d2)
{
    auto dm = spectral_diff_matrices(N, literal_d2);
    SystemSpec sys;
    sys.N = N;
    sys.grid_N = N;
    sys.label = std::string("rda:") + which;
    ScalarFn mu, v, a;
    switch (which) {
    case 'a': mu = constant(0.0); v = constant(1.0); a = constant(0.0); break;
    case 'b': mu = constant(0.1); v = constant(1.0); a = constant(0.0); break;
    case 'c': mu = constant(0.05); v = constant(1.0); a = constant(1.0); break;
    case 'd': mu = constant(2.0); v = constant(0.5); a = constant(0.0); break;
    case 'e':
        mu = [](double t) { return 0.01 * std::pow(std::cos(2.0 * t), 2); };
        v = [](double t) { return 1.0 + std::pow(std::sin(5.0 * t), 2); };
        a = [](double t) { return -0.5 * std::cos(t); };
        sys.time_invariant = false;
        break;
    case 'f':
        mu = constant(0.0);
        v = [](double t) { return 0.5 + std::sin(4.0 * t); };
        a = [](double t) { return std::pow(std::cos(5.0 * t), 2); };
        sys.time_invariant = false;
        break;
    case 'g':
        mu = constant(2.0); v = constant(0.0); a = constant(0.0);
        sys.forcing_base = [N](double) { return Vec::Constant(N, 0.001); };
        sys.base_constant = true;
        break;
    case 'h':
        mu = [](double t) { return 2.0 + 0.25 * std::sin(t) + 0.1 * std::cos(10.0 * t); };
        v = constant(0.0); a = constant(0.0);
        sys.forcing_scale = [](double t) { return 1.0 / (1.0 + t); };
        sys.time_invariant = false;
        break;
    default: throw std::invalid_argument(std::string("unknown rda case: ") + which);
    }
    // Skip coefficients that vanish identically so A(t) stays cheap to apply.
    auto nonzero = [](const ScalarFn& f) {
        for (double t : {0.0, 0.37, 1.1, 2.9}) if (f(t) != 0.0) return true;
        return false;
    };
    if (nonzero(mu)) add_term(sys, dm.D2, mu);
    if (nonzero(v)) add_term(sys, dm.D, v);
    if (nonzero(a)) add_term(sys, Mat::Identity(N, N), a);
    sys.params = {{"mu", mu}, {"v", v}, {"a", a}};
    std::vector<int> res;
    for (int i = N / 6; i < N; i += N / 6) res.push_back(i);
    sys.default_projection = ProjectionSpec(N, res);
    return sys;
}

SystemSpec build_wave_system(char which, int N, bool literal_d2)
{
    auto dm = spectral_diff_matrices(N, literal_d2);
    SystemSpec sys;
    sys.N = 2 * N;
    sys.grid_N = N;
    sys.c = 1.0;
    sys.label = std::string("wave:") + which;
    ScalarFn g1, g1dot, g2, Gam;
    switch (which) {
    case 'a':
        g1 = constant(0.25); g1dot = constant(0.0); g2 = constant(0.25);
        Gam = [](double t) { return 0.25 * t; };
        break;
    case 'b':
        g1 = [](double t) { return 0.5 * std::pow(std::sin(t), 2); };
        g1dot = [](double t) { return std::sin(t) * std::cos(t); };
        g2 = constant(1.0);
        Gam = [](double t) { return t; };
        sys.time_invariant = false;
        break;
    case 'c':
        g1 = [](double t) { return 0.5 * std::cos(t); };
        g1dot = [](double t) { return -0.5 * std::sin(t); };
        g2 = [](double t) { return 1.0 + std::sin(t); };
        Gam = [](double t) { return t - std::cos(t) + 1.0; };
        sys.time_invariant = false;
        break;
    default: throw std::invalid_argument(std::string("unknown wave case: ") + which);
    }
    const int M = 2 * N;
    Mat top = Mat::Zero(M, M), bot = Mat::Zero(M, M), fixed = Mat::Zero(M, M);
    top.topLeftCorner(N, N) = -Mat::Identity(N, N);
    bot.bottomRightCorner(N, N) = -Mat::Identity(N, N);
    fixed.topRightCorner(N, N) = Mat::Identity(N, N);
    fixed.bottomLeftCorner(N, N) = sys.c * sys.c * dm.D2;
    add_term(sys, fixed, constant(1.0));
    add_term(sys, top, g1);
    add_term(sys, bot, g2);
    sys.params = {{"gamma1", g1}, {"gamma1_dot", g1dot}, {"gamma2", g2}, {"Gamma", Gam}};
    sys.default_projection = ProjectionSpec::leading(M, N);
    return sys;
}

SystemSpec rotation_system()
{
    Mat A(2, 2);
    A << 0.0, 1.0, -1.0, 0.0;
    return constant_system(A, ProjectionSpec(2, {0}), "rotation");
}

SystemSpec constant_system(const Mat& A, const ProjectionSpec& proj, const std::string& label)
{
    if (A.rows() != A.cols() || A.rows() != proj.N()) throw ShapeError("constant_system: shape mismatch");
    SystemSpec sys;
    sys.N = static_cast<int>(A.rows());
    sys.grid_N = sys.N;
    sys.label = label;
    add_term(sys, A, constant(1.0));
    sys.default_projection = proj;
    return sys;
}

SystemSpec build_system(const std::string& label, int N, bool literal_d2)
{
    if (label == "rotation") return rotation_system();
    auto colon = label.find(':');
    if (colon == std::string::npos || colon + 2 != label.size()) throw std::invalid_argument("unknown case label: " + label);
    std::string family = label.substr(0, colon);
    char which = label[colon + 1];
    if (family == "rda") return build_rda_system(which, N > 0 ? N : 30, literal_d2);
    if (family == "wave") return build_wave_system(which, N > 0 ? N : 60, literal_d2);
    throw std::invalid_argument("unknown case label: " + label);
}

Mat sample_initial_conditions(int N, int Ns, std::mt19937_64& rng)
{
    if (N < 2 || N % 2 != 0) throw std::invalid_argument("initial conditions need an even grid size");
    if (Ns < 1) throw std::invalid_argument("initial conditions need Ns >= 1");
    std::uniform_real_distribution<double> ua(0.0, 1.0), uphi(0.0, 2.0 * kPi);
    Mat F(Ns, N);
    F.setZero();
    for (int s = 0; s < Ns; ++s) {
        for (int m = 0; m <= N / 2; ++m) {
            double a = ua(rng) / (1.0 + double(m) * m);
            double phi = uphi(rng);
            for (int j = 0; j < N; ++j) F(s, j) += a * std::cos(m * 2.0 * kPi * j / N - phi);
        }
    }
    return F;
}

Mat sample_initial_conditions(int N, int Ns, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return sample_initial_conditions(N, Ns, rng);
}

Mat sample_system_initial_conditions(const SystemSpec& sys, int Ns, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    if (sys.grid_N <= 0 || sys.N % sys.grid_N != 0) throw std::invalid_argument("system has no spatial grid");
    const int blocks = sys.N / sys.grid_N;
    Mat F(Ns, sys.N);
    for (int b = 0; b < blocks; ++b) F.middleCols(b * sys.grid_N, sys.grid_N) = sample_initial_conditions(sys.grid_N, Ns, rng);
    return F;
}

Mat rk4_interval(const std::function<Mat(double, const Mat&)>& f, double t0, double t1, const Mat& x0, Rk4Control& ctl)
{
    auto run = [&](int k) {
        const double h = (t1 - t0) / k;
        Mat x = x0;
        for (int i = 0; i < k; ++i) {
            double t = t0 + i * h;
            Mat k1 = f(t, x);
            Mat k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
            Mat k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
            Mat k4 = f(t + h, x + h * k3);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        return x;
    };
    int s = std::max(1, ctl.substeps);
    Mat coarse = run(s);
    for (;;) {
        if (2 * s > ctl.cap) {
            std::ostringstream os;
            os << "RK4 substep cap " << ctl.cap << " exceeded on [" << t0 << ", " << t1 << "]";
            throw NumericalError(os.str());
        }
        Mat fine = run(2 * s);
        double err = (fine - coarse).cwiseAbs().maxCoeff();
        double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
        if (err < ctl.tol * scale) {
            ctl.substeps = (err < ctl.tol * scale / 64.0 && s > 1) ? s / 2 : s;
            return (16.0 * fine - coarse) / 15.0;
        }
        s *= 2;
        coarse = std::move(fine);
    }
}

namespace {

template <class Fn>
void parallel_rows(int Ns, int threads, Fn&& fn)
{
    threads = std::max(1, std::min(threads, Ns));
    if (threads == 1) {
        for (int s = 0; s < Ns; ++s) fn(s);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int s = w; s < Ns; s += threads) fn(s);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<Mat> integrate_full(const SystemSpec& sys, const TimeGrid& grid, const Mat& F0, const EnsembleGenConfig& cfg)
{
    if (F0.cols() != sys.N) throw ShapeError("integrate: F0 column count differs from system dimension");
    const int Ns = static_cast<int>(F0.rows());
    const int NT = grid.NT;
    const double dt = grid.dt();
    std::vector<Mat> U(NT + 1);
    U[0] = F0;

    const bool exact = sys.time_invariant && (!sys.forced() || sys.forcing_constant()) && !cfg.force_rk4;
    if (exact) {
        // exp of the augmented matrix [[A, g], [0, 0]] carries the exact
        // variation-of-constants term for constant forcing.
        const int N = sys.N;
        Mat Aug = Mat::Zero(N + 1, N + 1);
        Aug.topLeftCorner(N, N) = sys.A(0.0);
        if (sys.forced()) Aug.topRightCorner(N, 1) = sys.g(0.0, Vec::Zero(N));
        Mat E = expm(dt * Aug);
        Mat Et = E.topLeftCorner(N, N).transpose();
        Eigen::RowVectorXd shift = E.topRightCorner(N, 1).transpose();
        for (int n = 0; n < NT; ++n) {
            U[n + 1] = U[n] * Et;
            if (sys.forced()) U[n + 1].rowwise() += shift;
        }
        return U;
    }

    for (int n = 1; n <= NT; ++n) U[n].resize(Ns, sys.N);
    // The wave operator is mostly identity blocks; sparse products keep the
    // per-trajectory march affordable.
    std::vector<Eigen::SparseMatrix<double>> sparse_terms;
    for (const auto& term : sys.terms) sparse_terms.push_back(term.M.sparseView());
    parallel_rows(Ns, cfg.threads, [&](int s) {
        const Vec u0 = F0.row(s).transpose();
        auto rhs = [&](double t, const Mat& x) -> Mat {
            Mat out = Mat::Zero(x.rows(), 1);
            for (size_t i = 0; i < sparse_terms.size(); ++i) out.noalias() += sys.terms[i].c(t) * (sparse_terms[i] * x);
            if (sys.forced()) out += sys.g(t, u0);
            return out;
        };
        Rk4Control ctl{cfg.solver_tol, cfg.substep_cap, 1};
        Mat x = u0;
        for (int n = 0; n < NT; ++n) {
            try {
                x = rk4_interval(rhs, grid.t(n), grid.t(n + 1), x, ctl);
            } catch (const NumericalError& e) {
                throw NumericalError(sys.label + ": integration failed at t=" + std::to_string(grid.t(n)) + ": " + e.what());
            }
            U[n + 1].row(s) = x.transpose();
        }
    });
    return U;
}

SnapshotEnsemble integrate_ensemble(const SystemSpec& sys, const ProjectionSpec& proj, const TimeGrid& grid,
                                    const Mat& F0, const EnsembleGenConfig& cfg)
{
    if (proj.N() != sys.N) throw ShapeError("integrate: projection dimension differs from system");
    std::vector<Mat> U = integrate_full(sys, grid, F0, cfg);
    const int NT = grid.NT;
    const int Ns = static_cast<int>(F0.rows());

    auto forcing_at = [&](double t) {
        Mat G(Ns, sys.N);
        for (int s = 0; s < Ns; ++s) G.row(s) = sys.g(t, F0.row(s).transpose()).transpose();
        return G;
    };

    SnapshotEnsemble ens;
    ens.grid = grid;
    ens.Ns = Ns;
    ens.d = proj.d();
    ens.d_tilde = proj.d_tilde();
    ens.mode = Observation::Full;
    ens.Phi.resize(NT + 1);
    ens.PhiTilde.resize(NT + 1);
    ens.PhiDot.resize(NT + 1);
    for (int n = 0; n <= NT; ++n) {
        const double t = grid.t(n);
        Mat rhs = U[n] * sys.A(t).transpose();
        if (sys.forced()) {
            Mat Gn = forcing_at(t);
            rhs += Gn;
            ens.G.push_back(proj.resolved_cols(Gn));
            ens.GTilde.push_back(proj.unresolved_cols(Gn));
        }
        ens.Phi[n] = proj.resolved_cols(U[n]);
        ens.PhiTilde[n] = proj.unresolved_cols(U[n]);
        ens.PhiDot[n] = proj.resolved_cols(rhs);
        U[n].resize(0, 0);
    }
    if (sys.forced()) {
        for (int n = 0; n < NT; ++n) {
            Mat Gh = forcing_at(grid.t(n + 0.5));
            ens.GHalf.push_back(proj.resolved_cols(Gh));
            ens.GTildeHalf.push_back(proj.unresolved_cols(Gh));
        }
    }
    ens.validate();
    return ens;
}

SnapshotEnsemble mask_partial(const SnapshotEnsemble& ens)
{
    SnapshotEnsemble out = ens;
    out.mode = Observation::Partial;
    out.PhiTilde.resize(1);
    out.validate();
    return out;
}

SnapshotEnsemble subsample(const SnapshotEnsemble& ens, int stride, int NT_coarse)
{
    if (stride < 1) throw std::invalid_argument("subsample: stride must be positive");
    if (NT_coarse < 0) {
        if (ens.grid.NT % stride != 0) throw std::invalid_argument("subsample: stride must divide N_T");
        NT_coarse = ens.grid.NT / stride;
    }
    if (NT_coarse < 1 || static_cast<long>(NT_coarse) * stride > ens.grid.NT)
        throw std::invalid_argument("subsample: coarse grid exceeds the fine horizon");
    if (stride == 1 && NT_coarse == ens.grid.NT) return ens;
    if (ens.forced() && stride % 2 != 0) throw std::invalid_argument("subsample: odd stride loses half-node forcing");
    SnapshotEnsemble out;
    out.grid = TimeGrid(ens.grid.dt() * stride * NT_coarse, NT_coarse);
    out.Ns = ens.Ns;
    out.d = ens.d;
    out.d_tilde = ens.d_tilde;
    out.mode = ens.mode;
    auto pick = [stride, NT_coarse](const std::vector<Mat>& v) {
        std::vector<Mat> r;
        for (int n = 0; n <= NT_coarse; ++n) r.push_back(v[static_cast<size_t>(n) * stride]);
        return r;
    };
    out.Phi = pick(ens.Phi);
    out.PhiDot = pick(ens.PhiDot);
    out.PhiTilde = ens.mode == Observation::Full ? pick(ens.PhiTilde) : ens.PhiTilde;
    if (ens.forced()) {
        out.G = pick(ens.G);
        out.GTilde = pick(ens.GTilde);
        for (int n = 0; n < out.grid.NT; ++n) {
            out.GHalf.push_back(ens.G[n * stride + stride / 2]);
            out.GTildeHalf.push_back(ens.GTilde[n * stride + stride / 2]);
        }
    }
    out.validate();
    return out;
}

}  // namespace mz
