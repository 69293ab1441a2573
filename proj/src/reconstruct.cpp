#include "mz/reconstruct.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mz {

SchemeRules scheme_rules(Scheme s)
{
    switch (s) {
    case Scheme::BackwardEuler: return {1.0, 1.0, 1.0, 1.0, 0, true};
    case Scheme::Midpoint: return {0.5, 0.5, 0.5, 0.5, 0, true};
    case Scheme::ForwardEuler: return {0.0, 0.0, 0.0, 1.0, 1, false};
    }
    throw std::invalid_argument("unknown scheme");
}

std::string to_string(SolveMode m)
{
    switch (m) {
    case SolveMode::Full: return "full";
    case SolveMode::Partial: return "partial";
    case SolveMode::PartialRegularized: return "partial_regularized";
    case SolveMode::FiniteMemory: return "finite_memory";
    }
    return "?";
}

EquationData::EquationData(const SnapshotEnsemble& ens, const SolveOptions& opt)
    : ens_(ens), opt_(opt), rules_(scheme_rules(opt.scheme)), NT_(ens.grid.NT), Ns_(ens.Ns), d_(ens.d),
      dtl_(ens.d_tilde), dt_(ens.grid.dt()), forced_(ens.forced())
{
    ens.validate();
    const double th = rules_.theta;
    Srev_.resize(Ns_, static_cast<Eigen::Index>(NT_) * d_);
    for (int n = 0; n < NT_; ++n)
        Srev_.middleCols(static_cast<Eigen::Index>(NT_ - 1 - n) * d_, d_) = th * ens.Phi[n + 1] + (1.0 - th) * ens.Phi[n];
    if (forced_) {
        GTrev_.resize(Ns_, static_cast<Eigen::Index>(NT_ + 1) * dtl_);
        for (int k = 0; k <= NT_; ++k) GTrev_.middleCols(static_cast<Eigen::Index>(NT_ - k) * dtl_, dtl_) = ens.GTilde[k];
    }
    Zr_.resize(NT_);
    for (int n = 0; n < NT_; ++n) {
        Mat deriv;
        if (opt.derivative == DerivativeSource::Difference)
            deriv = (ens.Phi[n + 1] - ens.Phi[n]) / dt_;
        else
            deriv = th * ens.PhiDot[n + 1] + (1.0 - th) * ens.PhiDot[n];
        if (forced_) {
            if (opt.scheme == Scheme::Midpoint)
                deriv -= ens.half_forcing() ? ens.GHalf[n] : Mat(0.5 * (ens.G[n] + ens.G[n + 1]));
            else
                deriv -= th * ens.G[n + 1] + (1.0 - th) * ens.G[n];
        }
        Zr_[n] = std::move(deriv);
    }
}

Mat EquationData::S(int n) const
{
    return Srev_.middleCols(static_cast<Eigen::Index>(NT_ - 1 - n) * d_, d_);
}

Mat EquationData::S_tilde(int n) const
{
    if (ens_.mode != Observation::Full) throw std::invalid_argument("unresolved snapshots need full observation data");
    const double th = rules_.theta;
    return th * ens_.PhiTilde[n + 1] + (1.0 - th) * ens_.PhiTilde[n];
}

Mat EquationData::init(int n) const
{
    const Mat& p0 = ens_.PhiTilde.front();
    if (!forced_) return p0;
    const double a = n == 0 ? rules_.alpha0 : rules_.alpha;
    return p0 + a * dt_ * ens_.GTilde.front();
}

Mat EquationData::memory_history(int n, int jmax, const Mat& Ystack) const
{
    if (jmax <= 0) return Mat::Zero(Ns_, Ystack.cols());
    return Srev_.middleCols(static_cast<Eigen::Index>(NT_ - n) * d_, static_cast<Eigen::Index>(jmax) * d_) *
           Ystack.middleRows(d_, static_cast<Eigen::Index>(jmax) * d_);
}

Mat EquationData::noise_history(int n, const Mat& Bstack) const
{
    const int e0 = rules_.hist_e0;
    const int cnt = n - e0;
    if (!forced_ || cnt <= 0) return Mat::Zero(Ns_, Bstack.cols());
    return dt_ * (GTrev_.middleCols(static_cast<Eigen::Index>(NT_ - n + e0) * dtl_, static_cast<Eigen::Index>(cnt) * dtl_) *
                  Bstack.middleRows(static_cast<Eigen::Index>(e0) * dtl_, static_cast<Eigen::Index>(cnt) * dtl_));
}

namespace {

void require_full(const SnapshotEnsemble& ens, const char* who)
{
    if (ens.mode != Observation::Full) throw std::invalid_argument(std::string(who) + " needs full observation data");
}

OperatorSequence empty_ops(const EquationData& eq, Scheme s, const TimeGrid& grid)
{
    OperatorSequence ops;
    ops.grid = grid;
    ops.scheme = s;
    ops.R.assign(eq.NT(), Mat::Zero(eq.d(), eq.d()));
    ops.K.assign(eq.NT(), Mat::Zero(eq.d(), eq.d()));
    ops.B.assign(eq.NT(), Mat::Zero(eq.d(), eq.d_tilde()));
    return ops;
}

Mat hcat(std::initializer_list<Mat> parts)
{
    Eigen::Index rows = parts.begin()->rows(), cols = 0;
    for (const auto& p : parts) cols += p.cols();
    Mat out(rows, cols);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p;
        c += p.cols();
    }
    return out;
}

// Greedy march over (dt K_n, B_n) with R frozen. When R was obtained by
// merging the lag-0 kernel (partial data), step 0 is skipped and Y_0 = 0.
void march_KB(const EquationData& eq, const std::vector<Mat>& R, bool skip_step0, const Mat& B0_given,
              const SolveOptions& opt, ReconstructionReport& rep)
{
    const int NT = eq.NT(), d = eq.d(), dtl = eq.d_tilde();
    const auto& rl = eq.rules();
    const double dt = eq.dt();
    Mat Ystack = Mat::Zero(static_cast<Eigen::Index>(NT) * d, d);
    Mat Bstack = Mat::Zero(static_cast<Eigen::Index>(NT) * dtl, d);

    auto L = [&](int n) -> Mat { return eq.Zr(n) - eq.S(n) * R[n].transpose(); };

    if (!skip_step0) {
        Mat F0 = rl.has_K0 ? hcat({rl.c0 * eq.S(0), eq.init(0)}) : eq.init(0);
        DenseLeastSquares ls0(F0, opt.rank_tol);
        Mat Z = L(0);
        Mat X = ls0.solve(Z);
        if (rl.has_K0) {
            Ystack.topRows(d) = X.topRows(d);
            Bstack.topRows(dtl) = X.bottomRows(dtl);
        } else {
            Bstack.topRows(dtl) = X;
        }
        auto dg = ls0.diagnostics();
        dg.residual = (Z - F0 * X).norm();
        rep.steps.push_back(dg);
        rep.residuals.push_back(dg.residual);
    } else {
        Bstack.topRows(dtl) = B0_given.transpose();
    }

    Mat F1 = hcat({eq.S(0), eq.init(1 < NT ? 1 : 0)});
    DenseLeastSquares ls1(F1, opt.rank_tol);
    rep.kb_design = ls1.diagnostics();
    if (ls1.diagnostics().rank < F1.cols() && NT > 1) {
        std::ostringstream os;
        os << "greedy design [S_0, PhiTilde_0 + a dt GTilde_0] is rank deficient (rank " << ls1.diagnostics().rank << " of "
           << F1.cols() << "); the data violate the full-column-rank conditions on F_0 and the noise column";
        throw NumericalError(os.str());
    }
    for (int n = 1; n < NT; ++n) {
        Mat Z = L(n) - eq.memory_history(n, n - 1, Ystack) - eq.noise_history(n, Bstack);
        if (rl.has_K0) Z.noalias() -= rl.c0 * eq.S(n) * Ystack.topRows(d);
        Mat X = ls1.solve(Z);
        Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d) = X.topRows(d);
        Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl) = X.bottomRows(dtl);
        auto dg = ls1.diagnostics();
        dg.residual = (Z - F1 * X).norm();
        rep.steps.push_back(dg);
        rep.residuals.push_back(dg.residual);
    }
    for (int n = 0; n < NT; ++n) {
        rep.ops.K[n] = Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d).transpose() / dt;
        rep.ops.B[n] = Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl).transpose();
        rep.ops.R[n] = R[n];
    }
}

}  // namespace

RSolution solve_R_per_step(const SnapshotEnsemble& ens, const SolveOptions& opt)
{
    require_full(ens, "solve_R_per_step");
    EquationData eq(ens, opt);
    const int d = eq.d();
    RSolution out;
    for (int n = 0; n < eq.NT(); ++n) {
        Mat F = hcat({eq.S(n), eq.S_tilde(n)});
        auto sol = solve_dense_ls(F, eq.Zr(n), opt.rank_tol);
        out.R.push_back(sol.X.topRows(d).transpose());
        out.Rtilde.push_back(sol.X.bottomRows(eq.d_tilde()).transpose());
        out.diag.push_back(sol.diag);
    }
    return out;
}

RSolution solve_R_global(const SnapshotEnsemble& ens, const SolveOptions& opt)
{
    require_full(ens, "solve_R_global");
    EquationData eq(ens, opt);
    const int d = eq.d(), dtl = eq.d_tilde(), Ns = eq.Ns(), NT = eq.NT();
    Mat F(static_cast<Eigen::Index>(NT) * Ns, d + dtl);
    Mat Z(static_cast<Eigen::Index>(NT) * Ns, d);
    for (int n = 0; n < NT; ++n) {
        F.block(static_cast<Eigen::Index>(n) * Ns, 0, Ns, d) = eq.S(n);
        F.block(static_cast<Eigen::Index>(n) * Ns, d, Ns, dtl) = eq.S_tilde(n);
        Z.middleRows(static_cast<Eigen::Index>(n) * Ns, Ns) = eq.Zr(n);
    }
    auto sol = solve_dense_ls(F, Z, opt.rank_tol);
    RSolution out;
    out.R.assign(NT, sol.X.topRows(d).transpose());
    out.Rtilde.assign(NT, sol.X.bottomRows(dtl).transpose());
    out.diag.push_back(sol.diag);
    return out;
}

ReconstructionReport solve_KB_greedy(const SnapshotEnsemble& ens, const std::vector<Mat>& R, const SolveOptions& opt)
{
    require_full(ens, "solve_KB_greedy");
    EquationData eq(ens, opt);
    if (static_cast<int>(R.size()) != eq.NT()) throw ShapeError("solve_KB_greedy: R sequence length differs from N_T");
    ReconstructionReport rep;
    rep.mode = SolveMode::Full;
    rep.ops = empty_ops(eq, opt.scheme, ens.grid);
    march_KB(eq, R, false, Mat(), opt, rep);
    return rep;
}

ReconstructionReport reconstruct_full(const SnapshotEnsemble& ens, bool global_R, const SolveOptions& opt)
{
    RSolution rs = global_R ? solve_R_global(ens, opt) : solve_R_per_step(ens, opt);
    ReconstructionReport rep = solve_KB_greedy(ens, rs.R, opt);
    rep.ops.Rtilde = rs.Rtilde;
    return rep;
}

ReconstructionReport solve_partial_greedy(const SnapshotEnsemble& ens, bool merge, const SolveOptions& opt)
{
    EquationData eq(ens, opt);
    const int NT = eq.NT(), d = eq.d(), dtl = eq.d_tilde();
    const auto& rl = eq.rules();
    const double dt = eq.dt();
    ReconstructionReport rep;
    rep.mode = SolveMode::Partial;
    rep.ops = empty_ops(eq, opt.scheme, ens.grid);

    if (merge) {
        // R + c0 dt K_0 is identified as one block; R is then held constant.
        Mat F0 = hcat({eq.S(0), eq.init(0)});
        auto sol = solve_dense_ls(F0, eq.Zr(0), opt.rank_tol);
        Mat M = sol.X.topRows(d).transpose();
        Mat B0 = sol.X.bottomRows(dtl).transpose();
        rep.steps.push_back(sol.diag);
        rep.residuals.push_back(sol.diag.residual);
        std::vector<Mat> R(NT, M);
        march_KB(eq, R, true, B0, opt, rep);
        for (const auto& s : rep.steps) rep.rank_deficient = rep.rank_deficient || s.rank < d + dtl;
        return rep;
    }

    Mat Ystack = Mat::Zero(static_cast<Eigen::Index>(NT) * d, d);
    Mat Bstack = Mat::Zero(static_cast<Eigen::Index>(NT) * dtl, d);
    for (int n = 0; n < NT; ++n) {
        const bool withK = n > 0 || rl.has_K0;
        const double cn = n == 0 ? rl.c0 : 1.0;
        Mat F = withK ? hcat({eq.S(n), cn * eq.S(0), eq.init(n)}) : hcat({eq.S(n), eq.init(n)});
        Mat Z = eq.Zr(n);
        if (n > 0) {
            Z -= eq.memory_history(n, n - 1, Ystack) + eq.noise_history(n, Bstack);
            if (rl.has_K0) Z.noalias() -= rl.c0 * eq.S(n) * Ystack.topRows(d);
        }
        auto sol = solve_dense_ls(F, Z, opt.rank_tol);
        rep.ops.R[n] = sol.X.topRows(d).transpose();
        if (withK) Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d) = sol.X.middleRows(d, d);
        Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl) = sol.X.bottomRows(dtl);
        rep.steps.push_back(sol.diag);
        rep.residuals.push_back(sol.diag.residual);
        rep.rank_deficient = rep.rank_deficient || sol.diag.rank < F.cols();
    }
    for (int n = 0; n < NT; ++n) {
        rep.ops.K[n] = Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d).transpose() / dt;
        rep.ops.B[n] = Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl).transpose();
    }
    return rep;
}

ReconstructionReport solve_partial_regularized(const SnapshotEnsemble& ens, double lambda_R, double lambda_K,
                                               const SolveOptions& opt, bool scaled_kernel_penalty)
{
    if (lambda_R < 0.0 || lambda_K < 0.0) throw std::invalid_argument("regularization weights must be non-negative");
    EquationData eq(ens, opt);
    const int NT = eq.NT(), d = eq.d(), dtl = eq.d_tilde(), Ns = eq.Ns();
    if (NT < 2) throw std::invalid_argument("regularized solve needs N_T >= 2");
    const auto& rl = eq.rules();
    const double dt = eq.dt();
    const double sR = std::sqrt(lambda_R);
    const double sK = std::sqrt(lambda_K) * (scaled_kernel_penalty ? 1.0 : 1.0 / dt);
    const Mat Id = Mat::Identity(d, d);

    ReconstructionReport rep;
    rep.mode = SolveMode::PartialRegularized;
    rep.lambda_R = lambda_R;
    rep.lambda_K = lambda_K;
    rep.ops = empty_ops(eq, opt.scheme, ens.grid);
    Mat Ystack = Mat::Zero(static_cast<Eigen::Index>(NT) * d, d);
    Mat Bstack = Mat::Zero(static_cast<Eigen::Index>(NT) * dtl, d);

    // Steps 0 and 1 are coupled through the penalties.
    // Columns: R_0, R_1, [Y_0], Y_1, B_0, B_1.
    {
        const bool k0 = rl.has_K0;
        const int cR0 = 0, cR1 = d, cY0 = 2 * d, cY1 = k0 ? 3 * d : 2 * d, cB0 = cY1 + d, cB1 = cB0 + dtl;
        const int cols = cB1 + dtl;
        const int rows = 2 * Ns + d + (k0 ? d : 0);
        Mat F = Mat::Zero(rows, cols);
        Mat Z = Mat::Zero(rows, d);
        F.block(0, cR0, Ns, d) = eq.S(0);
        if (k0) F.block(0, cY0, Ns, d) = rl.c0 * eq.S(0);
        F.block(0, cB0, Ns, dtl) = eq.init(0);
        F.block(Ns, cR1, Ns, d) = eq.S(1);
        if (k0) F.block(Ns, cY0, Ns, d) = rl.c0 * eq.S(1);
        F.block(Ns, cY1, Ns, d) = eq.S(0);
        if (eq.forced() && rl.hist_e0 == 0) {
            Mat Bsel = Mat::Identity(dtl, dtl);
            F.block(Ns, cB0, Ns, dtl) = eq.noise_history(1, Bsel);
        }
        F.block(Ns, cB1, Ns, dtl) = eq.init(1);
        F.block(2 * Ns, cR0, d, d) = -sR * Id;
        F.block(2 * Ns, cR1, d, d) = sR * Id;
        if (k0) {
            F.block(2 * Ns + d, cY0, d, d) = -sK * Id;
            F.block(2 * Ns + d, cY1, d, d) = sK * Id;
        }
        Z.topRows(Ns) = eq.Zr(0);
        Z.middleRows(Ns, Ns) = eq.Zr(1);
        auto sol = solve_dense_ls(F, Z, opt.rank_tol);
        rep.ops.R[0] = sol.X.middleRows(cR0, d).transpose();
        rep.ops.R[1] = sol.X.middleRows(cR1, d).transpose();
        if (k0) Ystack.topRows(d) = sol.X.middleRows(cY0, d);
        Ystack.middleRows(d, d) = sol.X.middleRows(cY1, d);
        Bstack.topRows(dtl) = sol.X.middleRows(cB0, dtl);
        Bstack.middleRows(dtl, dtl) = sol.X.middleRows(cB1, dtl);
        rep.steps.push_back(sol.diag);
        rep.residuals.push_back(sol.diag.residual);
        rep.rank_deficient = rep.rank_deficient || sol.diag.rank < cols;
    }

    Mat F = Mat::Zero(Ns + 2 * d, 2 * d + dtl);
    F.block(Ns, 0, d, d) = sR * Id;
    F.block(Ns + d, d, d, d) = sK * Id;
    for (int n = 2; n < NT; ++n) {
        F.block(0, 0, Ns, d) = eq.S(n);
        F.block(0, d, Ns, d) = eq.S(0);
        F.block(0, 2 * d, Ns, dtl) = eq.init(n);
        Mat Z(Ns + 2 * d, d);
        Mat J = eq.Zr(n) - eq.memory_history(n, n - 1, Ystack) - eq.noise_history(n, Bstack);
        if (rl.has_K0) J.noalias() -= rl.c0 * eq.S(n) * Ystack.topRows(d);
        Z.topRows(Ns) = J;
        Z.middleRows(Ns, d) = sR * rep.ops.R[n - 1].transpose();
        Z.bottomRows(d) = sK * Ystack.middleRows(static_cast<Eigen::Index>(n - 1) * d, d);
        auto sol = solve_dense_ls(F, Z, opt.rank_tol);
        rep.ops.R[n] = sol.X.topRows(d).transpose();
        Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d) = sol.X.middleRows(d, d);
        Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl) = sol.X.bottomRows(dtl);
        rep.steps.push_back(sol.diag);
        rep.residuals.push_back(sol.diag.residual);
        rep.rank_deficient = rep.rank_deficient || sol.diag.rank < F.cols();
    }
    for (int n = 0; n < NT; ++n) {
        rep.ops.K[n] = Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d).transpose() / dt;
        rep.ops.B[n] = Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl).transpose();
    }
    return rep;
}

FiniteMemoryProblem finite_memory_problem(const EquationData& eq, const std::vector<Mat>& R, int m)
{
    if (eq.forced()) throw std::invalid_argument("finite-memory solve requires zero forcing");
    const int NT = eq.NT(), d = eq.d(), dtl = eq.d_tilde(), Ns = eq.Ns();
    if (m < 1 || m > NT) throw std::invalid_argument("finite-memory bound must satisfy 0 < m <= N_T");
    if (static_cast<int>(R.size()) != NT) throw ShapeError("finite memory: R sequence length differs from N_T");
    const auto rl = eq.rules();
    const int mmax = std::min(m, NT - 1);
    const int j0 = rl.has_K0 ? 0 : 1;
    const int nY = std::max(0, mmax - j0 + 1);
    const Eigen::Index offY = static_cast<Eigen::Index>(NT) * dtl;
    const Eigen::Index ncols = offY + static_cast<Eigen::Index>(nY) * d;

    FiniteMemoryProblem p;
    p.m = mmax;
    p.j0 = j0;
    p.rhs.resize(static_cast<Eigen::Index>(NT) * Ns, d);
    for (int n = 0; n < NT; ++n) p.rhs.middleRows(static_cast<Eigen::Index>(n) * Ns, Ns) = eq.Zr(n) - eq.S(n) * R[n].transpose();

    const Mat Srev = eq.S_reversed();
    const Mat P0 = eq.phi_tilde0();
    const double c0 = rl.c0;
    p.op.rows = NT * Ns;
    p.op.cols = static_cast<int>(ncols);
    // Row block n couples B_n and Y_j, j0 <= j <= min(n, mmax), through
    // S_{n-j}; those S blocks are contiguous in the reversed storage.
    p.col_norms.resize(ncols);
    const Vec pn = P0.colwise().norm().transpose();
    for (int n = 0; n < NT; ++n) p.col_norms.segment(static_cast<Eigen::Index>(n) * dtl, dtl) = pn;
    Vec ysq = Vec::Zero(static_cast<Eigen::Index>(nY) * d);
    for (int j = j0; j <= mmax; ++j) {
        const double w = j == 0 ? c0 * c0 : 1.0;
        for (int k = 0; k + j < NT; ++k) ysq.segment(static_cast<Eigen::Index>(j - j0) * d, d) += w * eq.S(k).colwise().squaredNorm().transpose();
    }
    p.col_norms.tail(ysq.size()) = ysq.cwiseSqrt();

    p.op.apply = [=](const Mat& X) -> Mat {
        Mat out(static_cast<Eigen::Index>(NT) * Ns, X.cols());
        for (int n = 0; n < NT; ++n) {
            auto blk = out.middleRows(static_cast<Eigen::Index>(n) * Ns, Ns);
            blk.noalias() = P0 * X.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl);
            int jhi = std::min(n, mmax);
            if (jhi < j0) continue;
            int cnt = jhi - j0 + 1;
            blk.noalias() += Srev.middleCols(static_cast<Eigen::Index>(NT - 1 - n + j0) * d, static_cast<Eigen::Index>(cnt) * d) *
                             X.middleRows(offY, static_cast<Eigen::Index>(cnt) * d);
            if (j0 == 0 && c0 != 1.0)
                blk.noalias() -= (1.0 - c0) * Srev.middleCols(static_cast<Eigen::Index>(NT - 1 - n) * d, d) * X.middleRows(offY, d);
        }
        return out;
    };
    p.op.apply_adjoint = [=](const Mat& Y) -> Mat {
        Mat out = Mat::Zero(ncols, Y.cols());
        for (int n = 0; n < NT; ++n) {
            auto yb = Y.middleRows(static_cast<Eigen::Index>(n) * Ns, Ns);
            out.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl).noalias() = P0.transpose() * yb;
            int jhi = std::min(n, mmax);
            if (jhi < j0) continue;
            int cnt = jhi - j0 + 1;
            out.middleRows(offY, static_cast<Eigen::Index>(cnt) * d).noalias() +=
                Srev.middleCols(static_cast<Eigen::Index>(NT - 1 - n + j0) * d, static_cast<Eigen::Index>(cnt) * d).transpose() * yb;
        }
        if (j0 == 0 && c0 != 1.0) out.middleRows(offY, d) *= c0;
        return out;
    };
    return p;
}

namespace {

ReconstructionReport finite_memory_report(const EquationData& eq, const SnapshotEnsemble& ens, const std::vector<Mat>& R,
                                          const FiniteMemoryProblem& p, const Mat& X, const Scheme scheme)
{
    const int NT = eq.NT(), d = eq.d(), dtl = eq.d_tilde();
    ReconstructionReport rep;
    rep.mode = SolveMode::FiniteMemory;
    rep.m_support = p.m;
    rep.ops = empty_ops(eq, scheme, ens.grid);
    rep.ops.m_support = p.m;
    const Eigen::Index offY = static_cast<Eigen::Index>(NT) * dtl;
    for (int n = 0; n < NT; ++n) {
        rep.ops.R[n] = R[n];
        rep.ops.B[n] = X.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl).transpose();
    }
    for (int j = p.j0; j <= p.m; ++j)
        rep.ops.K[j] = X.middleRows(offY + static_cast<Eigen::Index>(j - p.j0) * d, d).transpose() / eq.dt();
    rep.residuals.push_back((p.rhs - p.op.apply(X)).norm());
    return rep;
}

}  // namespace

ReconstructionReport solve_finite_memory(const SnapshotEnsemble& ens, const std::vector<Mat>& R, int m, int max_iter,
                                         const SolveOptions& opt, double atol, bool precondition)
{
    require_full(ens, "solve_finite_memory");
    EquationData eq(ens, opt);
    auto p = finite_memory_problem(eq, R, m);
    // Right preconditioner: each B block goes through the inverse triangular
    // factor of PhiTilde_0, kernel columns are scaled to unit norm.
    const int NT = eq.NT(), dtl = eq.d_tilde();
    const Eigen::Index offY = static_cast<Eigen::Index>(NT) * dtl;
    Mat Rinv = Mat::Identity(dtl, dtl);
    Vec scale = Vec::Ones(p.op.cols);
    if (precondition) {
        const Mat& P0 = eq.phi_tilde0();
        Eigen::HouseholderQR<Mat> qr(P0);
        Mat Rf = qr.matrixQR().topRows(std::min<Eigen::Index>(dtl, P0.rows())).triangularView<Eigen::Upper>();
        const double tiny = 1e-12 * Rf.diagonal().cwiseAbs().maxCoeff();
        if (P0.rows() >= dtl && Rf.diagonal().cwiseAbs().minCoeff() > tiny)
            Rinv = Rf.triangularView<Eigen::Upper>().solve(Mat::Identity(dtl, dtl));
        else
            for (Eigen::Index i = 0; i < offY; ++i) scale[i] = p.col_norms[i] > 0.0 ? 1.0 / p.col_norms[i] : 1.0;
        for (Eigen::Index i = offY; i < scale.size(); ++i) scale[i] = p.col_norms[i] > 0.0 ? 1.0 / p.col_norms[i] : 1.0;
    }
    auto right = [&](const Mat& Z, bool adjoint) {
        Mat X = scale.asDiagonal() * Z;
        const Mat& M = Rinv;
        for (int n = 0; n < NT; ++n) {
            auto blk = X.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl);
            blk = adjoint ? Mat(M.transpose() * blk) : Mat(M * blk);
        }
        return X;
    };
    LinearOperator op = p.op;
    op.apply = [&](const Mat& Z) -> Mat { return p.op.apply(right(Z, false)); };
    op.apply_adjoint = [&](const Mat& Y) -> Mat { return right(p.op.apply_adjoint(Y), true); };
    auto res = lsqr(op, p.rhs, max_iter, atol);
    Mat X = right(res.X, false);
    auto rep = finite_memory_report(eq, ens, R, p, X, opt.scheme);
    rep.lsqr_iterations = res.max_iterations;
    return rep;
}

ReconstructionReport solve_finite_memory_dense(const SnapshotEnsemble& ens, const std::vector<Mat>& R, int m, const SolveOptions& opt)
{
    require_full(ens, "solve_finite_memory_dense");
    EquationData eq(ens, opt);
    auto p = finite_memory_problem(eq, R, m);
    Mat F = p.op.apply(Mat::Identity(p.op.cols, p.op.cols));
    auto sol = solve_dense_ls(F, p.rhs, opt.rank_tol);
    auto rep = finite_memory_report(eq, ens, R, p, sol.X, opt.scheme);
    rep.steps.push_back(sol.diag);
    rep.rank_deficient = sol.diag.rank < F.cols();
    return rep;
}

std::vector<LsDiagnostics> demo_nonstationary_illposedness(const SnapshotEnsemble& ens, int n_max, const SolveOptions& opt)
{
    EquationData eq(ens, opt);
    n_max = std::min(n_max, eq.NT() - 1);
    std::vector<LsDiagnostics> out;
    const int d = eq.d(), dtl = eq.d_tilde();
    Mat F(eq.Ns(), dtl + static_cast<Eigen::Index>(n_max + 1) * d);
    F.leftCols(dtl) = eq.phi_tilde0();
    for (int n = 0; n <= n_max; ++n) {
        F.middleCols(dtl + static_cast<Eigen::Index>(n) * d, d) = eq.S(n);
        Mat Fn = F.leftCols(dtl + static_cast<Eigen::Index>(n + 1) * d);
        Vec s = singular_values(Fn);
        LsDiagnostics dg;
        dg.sigma_max = s.size() ? s[0] : 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s[i] >= opt.rank_tol * dg.sigma_max && s[i] > 0.0) ++dg.rank;
        dg.sigma_min = Fn.cols() > Fn.rows() ? 0.0 : s[s.size() - 1];
        dg.kappa = dg.sigma_min > 0.0 ? dg.sigma_max / dg.sigma_min : std::numeric_limits<double>::infinity();
        out.push_back(dg);
    }
    return out;
}

}  // namespace mz
