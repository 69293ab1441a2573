#include "mz/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <random>

namespace mz {

Mat expm(const Mat& A)
{
    if (A.rows() != A.cols()) throw ShapeError("expm: matrix is not square");
    return A.exp();
}

DenseLeastSquares::DenseLeastSquares(const Mat& F, double rank_tol)
{
    if (F.rows() < 1 || F.cols() < 1) throw ShapeError("least squares: empty design matrix");
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw std::invalid_argument("rank_tol must lie in (0,1)");
    Eigen::JacobiSVD<Mat, Eigen::ColPivHouseholderQRPreconditioner> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const int k = static_cast<int>(s.size());
    diag_.sigma_max = k ? s[0] : 0.0;
    diag_.sigma_min = k ? s[k - 1] : 0.0;
    // A wide matrix has n - m implicit zero singular values.
    if (F.cols() > F.rows()) diag_.sigma_min = 0.0;
    diag_.kappa = diag_.sigma_min > 0.0 ? diag_.sigma_max / diag_.sigma_min : std::numeric_limits<double>::infinity();
    int r = 0;
    while (r < k && s[r] > 0.0 && s[r] >= rank_tol * diag_.sigma_max) ++r;
    diag_.rank = r;
    U_ = svd.matrixU().leftCols(r);
    V_ = svd.matrixV().leftCols(r);
    inv_s_ = s.head(r).cwiseInverse();
}

Mat DenseLeastSquares::solve(const Mat& Z) const
{
    if (Z.rows() != U_.rows()) throw ShapeError("least squares: right-hand side row count mismatch");
    return V_ * (inv_s_.asDiagonal() * (U_.transpose() * Z));
}

LsSolution solve_dense_ls(const Mat& F, const Mat& Z, double rank_tol)
{
    DenseLeastSquares ls(F, rank_tol);
    LsSolution out{ls.solve(Z), ls.diagnostics()};
    out.diag.residual = (Z - F * out.X).norm();
    return out;
}

Vec singular_values(const Mat& F)
{
    Eigen::BDCSVD<Mat> svd(F);
    return svd.singularValues();
}

double cond2(const Mat& F)
{
    Vec s = singular_values(F);
    if (s.size() == 0) return std::numeric_limits<double>::infinity();
    double smin = F.cols() > F.rows() ? 0.0 : s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

double perturbation_bound(const Mat& F, const Mat& dF, const Mat& X, const Mat& dZ, const Mat& O)
{
    Vec s = singular_values(F);
    if (s.size() == 0 || F.cols() > F.rows()) return std::numeric_limits<double>::infinity();
    const double fn = s[0], kappa = s[0] / s[s.size() - 1];
    const double dfn = dF.size() ? singular_values(dF)[0] : 0.0;
    const double denom = 1.0 - kappa * dfn / fn;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    const double xn = X.norm();
    return kappa / denom * (dZ.norm() / (fn * xn) + dfn / fn + O.norm() / (fn * xn));
}

LinearOperator dense_operator(const Mat& F)
{
    LinearOperator op;
    op.rows = static_cast<int>(F.rows());
    op.cols = static_cast<int>(F.cols());
    op.apply = [F](const Mat& X) -> Mat { return F * X; };
    op.apply_adjoint = [F](const Mat& Y) -> Mat { return F.transpose() * Y; };
    return op;
}

double adjoint_mismatch(const LinearOperator& op, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Mat u(op.cols, 1), v(op.rows, 1);
    for (int i = 0; i < op.cols; ++i) u(i, 0) = nd(rng);
    for (int i = 0; i < op.rows; ++i) v(i, 0) = nd(rng);
    Mat Fu = op.apply(u);
    Mat Ftv = op.apply_adjoint(v);
    if (Fu.rows() != op.rows || Ftv.rows() != op.cols) throw ShapeError("operator output shape mismatch");
    double lhs = (Fu.transpose() * v)(0, 0);
    double rhs = (u.transpose() * Ftv)(0, 0);
    double scale = Fu.norm() * v.norm();
    if (scale == 0.0) scale = 1.0;
    return std::abs(lhs - rhs) / scale;
}

LsqrResult lsqr(const LinearOperator& op, const Mat& Z, int max_iter, double atol, double btol, bool check_adjoint)
{
    if (Z.rows() != op.rows) throw ShapeError("lsqr: right-hand side row count mismatch");
    if (check_adjoint && adjoint_mismatch(op) > 1e-8) throw std::logic_error("lsqr: apply and apply_adjoint are not adjoint");
    if (btol < 0.0) btol = atol;

    const int p = static_cast<int>(Z.cols());
    LsqrResult res;
    res.X = Mat::Zero(op.cols, p);
    res.iterations.assign(p, 0);
    res.residuals.assign(p, {});

    Mat U = Z;
    Vec beta = U.colwise().norm().transpose();
    Vec bnorm = beta;
    std::vector<bool> active(p, true);
    for (int j = 0; j < p; ++j) {
        if (beta[j] > 0.0)
            U.col(j) /= beta[j];
        else
            active[j] = false;
    }
    Mat V = op.apply_adjoint(U);
    Vec alpha = V.colwise().norm().transpose();
    for (int j = 0; j < p; ++j) {
        if (alpha[j] > 0.0)
            V.col(j) /= alpha[j];
        else
            active[j] = false;
    }
    Mat W = V;
    Vec phibar = beta, rhobar = alpha, anorm2 = Vec::Zero(p);
    for (int j = 0; j < p; ++j) res.residuals[j].push_back(beta[j]);

    for (int it = 0; it < max_iter; ++it) {
        bool any = false;
        for (int j = 0; j < p; ++j) any = any || active[j];
        if (!any) break;

        U = op.apply(V) - U * alpha.asDiagonal();
        beta = U.colwise().norm().transpose();
        for (int j = 0; j < p; ++j)
            if (beta[j] > 0.0) U.col(j) /= beta[j];
        V = op.apply_adjoint(U) - V * beta.asDiagonal();
        alpha = V.colwise().norm().transpose();
        for (int j = 0; j < p; ++j)
            if (alpha[j] > 0.0) V.col(j) /= alpha[j];

        for (int j = 0; j < p; ++j) {
            if (!active[j]) continue;
            anorm2[j] += alpha[j] * alpha[j] + beta[j] * beta[j];
            double rho = std::hypot(rhobar[j], beta[j]);
            double c = rhobar[j] / rho;
            double s = beta[j] / rho;
            double theta = s * alpha[j];
            rhobar[j] = -c * alpha[j];
            double phi = c * phibar[j];
            phibar[j] = s * phibar[j];
            res.X.col(j) += (phi / rho) * W.col(j);
            W.col(j) = V.col(j) - (theta / rho) * W.col(j);
            res.iterations[j] = it + 1;

            double rnorm = phibar[j];
            res.residuals[j].push_back(rnorm);
            double anorm = std::sqrt(anorm2[j]);
            double arnorm = alpha[j] * std::abs(c) * rnorm;
            double xnorm = res.X.col(j).norm();
            double test1 = rnorm / bnorm[j];
            double rtol = btol + atol * anorm * xnorm / bnorm[j];
            double test2 = rnorm > 0.0 ? arnorm / (anorm * rnorm) : 0.0;
            if (test1 <= rtol || test2 <= atol || alpha[j] == 0.0 || beta[j] == 0.0) active[j] = false;
        }
    }
    for (int j = 0; j < p; ++j) res.max_iterations = std::max(res.max_iterations, res.iterations[j]);
    return res;
}

}  // namespace mz
