#include "mz/state_space.hpp"

#include <algorithm>
#include <cmath>

namespace mz {

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::BackwardEuler: return "backward_euler";
    case Scheme::Midpoint: return "implicit_midpoint";
    case Scheme::ForwardEuler: return "forward_euler";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s)
{
    if (s == "backward_euler" || s == "be") return Scheme::BackwardEuler;
    if (s == "implicit_midpoint" || s == "midpoint" || s == "mp") return Scheme::Midpoint;
    if (s == "forward_euler" || s == "fe") return Scheme::ForwardEuler;
    throw std::invalid_argument("unknown scheme: " + s);
}

double node_offset(Scheme s)
{
    switch (s) {
    case Scheme::BackwardEuler: return 1.0;
    case Scheme::Midpoint: return 0.5;
    case Scheme::ForwardEuler: return 0.0;
    }
    return 0.0;
}

TimeGrid::TimeGrid(double T_, int NT_) : T(T_), NT(NT_)
{
    if (!(T > 0.0) || NT < 1)
        throw std::invalid_argument("time grid needs T > 0 and N_T >= 1");
}

TimeGrid TimeGrid::from_dt(double T, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    int NT = static_cast<int>(std::floor(T / dt + 1e-9));
    if (NT < 1) throw std::invalid_argument("dt larger than the horizon");
    return TimeGrid(NT * dt, NT);
}

ProjectionSpec::ProjectionSpec(int N, std::vector<int> resolved) : N_(N), res_(std::move(resolved))
{
    if (N_ < 2) throw ShapeError("projection needs N >= 2");
    if (res_.empty() || static_cast<int>(res_.size()) >= N_)
        throw ShapeError("projection needs 1 <= d < N");
    for (size_t i = 0; i < res_.size(); ++i) {
        if (res_[i] < 0 || res_[i] >= N_) throw ShapeError("resolved index out of range");
        if (i > 0 && res_[i] <= res_[i - 1]) throw ShapeError("resolved indices must be sorted and distinct");
    }
    for (int i = 0, j = 0; i < N_; ++i) {
        if (j < d() && res_[j] == i)
            ++j;
        else
            unres_.push_back(i);
    }
}

ProjectionSpec ProjectionSpec::leading(int N, int d)
{
    std::vector<int> idx(d);
    for (int i = 0; i < d; ++i) idx[i] = i;
    return ProjectionSpec(N, idx);
}

std::pair<Vec, Vec> ProjectionSpec::split(const Vec& u) const
{
    if (u.size() != N_) throw ShapeError("split: vector length differs from N");
    Vec a(d()), b(d_tilde());
    for (int i = 0; i < d(); ++i) a[i] = u[res_[i]];
    for (int i = 0; i < d_tilde(); ++i) b[i] = u[unres_[i]];
    return {a, b};
}

Vec ProjectionSpec::merge(const Vec& phi, const Vec& phiTilde) const
{
    if (phi.size() != d() || phiTilde.size() != d_tilde()) throw ShapeError("merge: block sizes differ from projection");
    Vec u(N_);
    for (int i = 0; i < d(); ++i) u[res_[i]] = phi[i];
    for (int i = 0; i < d_tilde(); ++i) u[unres_[i]] = phiTilde[i];
    return u;
}

Mat ProjectionSpec::resolved_cols(const Mat& X) const
{
    if (X.cols() != N_) throw ShapeError("resolved_cols: column count differs from N");
    return X(Eigen::all, res_);
}

Mat ProjectionSpec::unresolved_cols(const Mat& X) const
{
    if (X.cols() != N_) throw ShapeError("unresolved_cols: column count differs from N");
    return X(Eigen::all, unres_);
}

Blocks extract_blocks(const Mat& A, const ProjectionSpec& proj)
{
    if (A.rows() != A.cols()) throw ShapeError("extract_blocks: matrix is not square");
    if (A.rows() != proj.N()) throw ShapeError("extract_blocks: matrix size differs from N");
    const auto& r = proj.resolved();
    const auto& u = proj.unresolved();
    return {A(r, r), A(r, u), A(u, r), A(u, u)};
}

Mat assemble_blocks(const Blocks& b, const ProjectionSpec& proj)
{
    const auto& r = proj.resolved();
    const auto& u = proj.unresolved();
    Mat A(proj.N(), proj.N());
    A(r, r) = b.R;
    A(r, u) = b.Rt;
    A(u, r) = b.U;
    A(u, u) = b.Ut;
    return A;
}

namespace {

void check_seq(const std::vector<Mat>& v, size_t len, int rows, int cols, const char* what)
{
    if (v.size() != len) throw ShapeError(std::string(what) + ": wrong sequence length");
    for (const auto& m : v)
        if (m.rows() != rows || m.cols() != cols) throw ShapeError(std::string(what) + ": inconsistent block shape");
}

}  // namespace

void SnapshotEnsemble::validate() const
{
    const size_t nodes = grid.NT + 1;
    check_seq(Phi, nodes, Ns, d, "Phi");
    check_seq(PhiDot, nodes, Ns, d, "PhiDot");
    check_seq(PhiTilde, mode == Observation::Full ? nodes : 1, Ns, d_tilde, "PhiTilde");
    if (forced()) {
        check_seq(G, nodes, Ns, d, "G");
        check_seq(GTilde, nodes, Ns, d_tilde, "GTilde");
    } else if (!GTilde.empty()) {
        throw ShapeError("GTilde present without G");
    }
    if (half_forcing()) {
        check_seq(GHalf, grid.NT, Ns, d, "GHalf");
        check_seq(GTildeHalf, grid.NT, Ns, d_tilde, "GTildeHalf");
    }
}

void OperatorSequence::validate() const
{
    const size_t n = grid.NT;
    if (R.size() != n || K.size() != n || B.size() != n) throw ShapeError("operator sequences must have length N_T");
    const int dd = d();
    const int dt = d_tilde();
    for (size_t i = 0; i < n; ++i) {
        if (R[i].rows() != dd || R[i].cols() != dd) throw ShapeError("R block shape");
        if (K[i].rows() != dd || K[i].cols() != dd) throw ShapeError("K block shape");
        if (B[i].rows() != dd || B[i].cols() != dt) throw ShapeError("B block shape");
    }
}

}  // namespace mz
