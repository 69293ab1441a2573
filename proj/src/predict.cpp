#include "mz/predict.hpp"

#include <sstream>

namespace mz {

PredictionInput prediction_input(const OperatorSequence& ops, const SnapshotEnsemble& test)
{
    if (test.grid.NT != ops.grid.NT) throw ShapeError("prediction: test grid differs from operator grid");
    PredictionInput inp;
    inp.ops = ops;
    inp.phi0 = test.Phi.front();
    inp.phiTilde0 = test.PhiTilde.front();
    inp.G = test.G;
    inp.GTilde = test.GTilde;
    inp.GHalf = test.GHalf;
    return inp;
}

std::vector<Mat> predict(const PredictionInput& inp)
{
    const auto& ops = inp.ops;
    ops.validate();
    const int NT = ops.grid.NT, d = ops.d(), dtl = ops.d_tilde();
    const int Ns = static_cast<int>(inp.phi0.rows());
    if (inp.phi0.cols() != d || inp.phiTilde0.cols() != dtl || inp.phiTilde0.rows() != Ns)
        throw ShapeError("prediction: initial state shapes differ from operators");
    const bool forced = !inp.G.empty();
    if (forced && (static_cast<int>(inp.G.size()) != NT + 1 || static_cast<int>(inp.GTilde.size()) != NT + 1))
        throw ShapeError("prediction: forcing must cover every node");
    const auto rl = scheme_rules(ops.scheme);
    const double dt = ops.grid.dt(), th = rl.theta;
    const int m = inp.m_support >= 0 ? inp.m_support : (ops.m_support >= 0 ? ops.m_support : NT);

    Mat Ystack(static_cast<Eigen::Index>(NT) * d, d);
    Mat Bstack(static_cast<Eigen::Index>(NT) * dtl, d);
    for (int n = 0; n < NT; ++n) {
        Ystack.middleRows(static_cast<Eigen::Index>(n) * d, d) = dt * ops.K[n].transpose();
        Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl) = ops.B[n].transpose();
    }
    Mat GTrev;
    if (forced) {
        GTrev.resize(Ns, static_cast<Eigen::Index>(NT + 1) * dtl);
        for (int k = 0; k <= NT; ++k) GTrev.middleCols(static_cast<Eigen::Index>(NT - k) * dtl, dtl) = inp.GTilde[k];
    }
    Mat Srev(Ns, static_cast<Eigen::Index>(NT) * d);
    const Mat Id = Mat::Identity(d, d);

    std::vector<Mat> phi(NT + 1);
    phi[0] = inp.phi0;
    Eigen::PartialPivLU<Mat> lu;
    Mat explicit_part;
    int factored_for = -1;
    for (int n = 0; n < NT; ++n) {
        if (factored_for < 0 || !(ops.R[n] == ops.R[factored_for])) {
            Mat Q = rl.has_K0 ? Mat(ops.R[n] + rl.c0 * dt * ops.K[0]) : ops.R[n];
            Mat M = Id - dt * th * Q;
            Eigen::JacobiSVD<Mat> svd(M);
            const Vec& s = svd.singularValues();
            if (s[s.size() - 1] <= 1e-14 * std::max(1.0, s[0])) {
                std::ostringstream os;
                os << "prediction: implicit factor singular at step " << n << " (sigma_min " << s[s.size() - 1] << ")";
                throw NumericalError(os.str());
            }
            lu.compute(M);
            explicit_part = (Id + dt * (1.0 - th) * Q).transpose();
            factored_for = n;
        }
        Mat rhs = phi[n] * explicit_part;
        Mat acc = Mat::Zero(Ns, d);
        if (forced) {
            if (ops.scheme == Scheme::Midpoint)
                acc += inp.GHalf.empty() ? Mat(0.5 * (inp.G[n] + inp.G[n + 1])) : inp.GHalf[n];
            else
                acc += th * inp.G[n + 1] + (1.0 - th) * inp.G[n];
        }
        const double a = n == 0 ? rl.alpha0 : rl.alpha;
        Mat init = forced ? Mat(inp.phiTilde0 + a * dt * inp.GTilde.front()) : inp.phiTilde0;
        acc.noalias() += init * Bstack.middleRows(static_cast<Eigen::Index>(n) * dtl, dtl);
        const int cnt = n - rl.hist_e0;
        if (forced && cnt > 0) {
            acc.noalias() += dt * GTrev.middleCols(static_cast<Eigen::Index>(NT - n + rl.hist_e0) * dtl, static_cast<Eigen::Index>(cnt) * dtl) *
                             Bstack.middleRows(static_cast<Eigen::Index>(rl.hist_e0) * dtl, static_cast<Eigen::Index>(cnt) * dtl);
        }
        const int jmax = std::min(n, m);
        if (jmax > 0) {
            acc.noalias() += Srev.middleCols(static_cast<Eigen::Index>(NT - n) * d, static_cast<Eigen::Index>(jmax) * d) *
                             Ystack.middleRows(d, static_cast<Eigen::Index>(jmax) * d);
        }
        rhs += dt * acc;
        phi[n + 1] = lu.solve(rhs.transpose()).transpose();
        Srev.middleCols(static_cast<Eigen::Index>(NT - 1 - n) * d, d) = th * phi[n + 1] + (1.0 - th) * phi[n];
    }
    return phi;
}

OperatorSequence markovian_only(const OperatorSequence& ops)
{
    OperatorSequence out = ops;
    for (auto& k : out.K) k.setZero();
    for (auto& b : out.B) b.setZero();
    return out;
}

double history_cost_estimate(const TimeGrid& grid, int d, int d_tilde)
{
    const double NT = grid.NT;
    // Step n touches n kernel cells (d x d) and up to n forcing cells (d x d_tilde).
    return NT * (NT + 1) / 2.0 * (double(d) * d + double(d) * d_tilde);
}

}  // namespace mz
