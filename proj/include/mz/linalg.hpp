#pragma once

#include "mz/state_space.hpp"

#include <cstdint>
#include <functional>

namespace mz {

Mat expm(const Mat& A);

struct LsDiagnostics {
    int rank = 0;
    double sigma_min = 0.0;  // smallest of the min(m, n) singular values
    double sigma_max = 0.0;
    double kappa = 0.0;      // sigma_max / sigma_min, infinite when sigma_min = 0
    double residual = 0.0;   // ||Z - F X||_F of the last solve
};

// Minimum-norm least squares, factored once and reused for many right-hand
// sides. Column-pivoted QR preconditioned SVD; rank counts sigma_i >= tol * sigma_max.
class DenseLeastSquares {
public:
    explicit DenseLeastSquares(const Mat& F, double rank_tol = 1e-10);

    Mat solve(const Mat& Z) const;
    const LsDiagnostics& diagnostics() const { return diag_; }
    int cols() const { return static_cast<int>(V_.rows()); }

private:
    Mat U_;
    Mat V_;
    Vec inv_s_;
    LsDiagnostics diag_;
};

struct LsSolution {
    Mat X;
    LsDiagnostics diag;
};

LsSolution solve_dense_ls(const Mat& F, const Mat& Z, double rank_tol = 1e-10);

// Singular values only.
Vec singular_values(const Mat& F);
double cond2(const Mat& F);

// Relative error bound ||Xhat - X||_F / ||X||_F for the perturbed problem
// (F + dF, Z + dZ), where X solves the unperturbed one and O = Z - F X.
// Infinite when ||dF||_2 >= sigma_min(F).
double perturbation_bound(const Mat& F, const Mat& dF, const Mat& X, const Mat& dZ, const Mat& O);

// Matrix-free operator acting on blocks of columns; column j of the output
// only depends on column j of the input.
struct LinearOperator {
    int rows = 0;
    int cols = 0;
    std::function<Mat(const Mat&)> apply;
    std::function<Mat(const Mat&)> apply_adjoint;
};

LinearOperator dense_operator(const Mat& F);

// Relative mismatch |<Fu,v> - <u,F^T v>| / (||Fu|| ||v||) on random vectors.
double adjoint_mismatch(const LinearOperator& op, std::uint64_t seed = 7);

struct LsqrResult {
    Mat X;
    std::vector<int> iterations;                // per column
    std::vector<std::vector<double>> residuals; // per column ||r_k||
    int max_iterations = 0;
};

// Paige-Saunders LSQR started from zero. Right-hand side columns are
// advanced together but every scalar recurrence is kept per column.
LsqrResult lsqr(const LinearOperator& op, const Mat& Z, int max_iter, double atol = 1e-14,
                double btol = -1.0, bool check_adjoint = true);

}  // namespace mz
