#include "ls_instances.hpp"
#include "mz/linalg.hpp"

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

using namespace mz;

TEST_SUITE("linalg") {

TEST_CASE("identity design returns the right-hand side")
{
    Mat Z = Mat::Random(6, 3);
    auto sol = solve_dense_ls(Mat::Identity(6, 6), Z);
    CHECK((sol.X - Z).norm() < 1e-14);
    CHECK(sol.diag.rank == 6);
    CHECK(sol.diag.kappa == doctest::Approx(1.0));
}

TEST_CASE("consistent overdetermined data is recovered")
{
    std::srand(3);
    Mat F = Mat::Random(40, 10), Xs = Mat::Random(10, 4);
    auto sol = solve_dense_ls(F, F * Xs);
    CHECK((sol.X - Xs).norm() < 1e-10 * Xs.norm());
    CHECK(sol.diag.residual < 1e-10);
    DenseLeastSquares ls(F);
    CHECK((ls.solve(F * Xs) - Xs).norm() < 1e-10 * Xs.norm());
}

TEST_CASE("duplicated column reports rank n-1 and the minimum-norm solution")
{
    Mat F = Mat::Random(20, 5);
    F.col(4) = F.col(1);
    Vec x = Vec::Random(5);
    x(4) = x(1);
    auto sol = solve_dense_ls(F, F * x);
    CHECK(sol.diag.rank == 4);
    CHECK(sol.X(1, 0) == doctest::Approx(sol.X(4, 0)));
    CHECK((F * sol.X - F * x).norm() < 1e-10);
    CHECK(sol.diag.sigma_min < 1e-10 * sol.diag.sigma_max);
}

TEST_CASE("LSQR solves a square invertible system")
{
    Mat F = Mat::Random(15, 15) + 15.0 * Mat::Identity(15, 15);
    Mat x = Mat::Random(15, 1);
    auto res = lsqr(dense_operator(F), F * x, 500, 1e-14);
    CHECK((res.X - x).norm() < 1e-10 * x.norm());
}

TEST_CASE("LSQR matches the dense solver on an overdetermined problem")
{
    Mat F = Mat::Random(50, 20), Z = Mat::Random(50, 3);
    auto res = lsqr(dense_operator(F), Z, 500, 1e-14);
    auto dense = solve_dense_ls(F, Z);
    CHECK((res.X - dense.X).norm() < 1e-10 * dense.X.norm());
    REQUIRE(res.iterations.size() == 3);
    for (const auto& r : res.residuals) CHECK(r.size() >= 1);
}

TEST_CASE("LSQR rejects an inconsistent adjoint")
{
    LinearOperator bad = dense_operator(Mat::Random(8, 4));
    bad.apply_adjoint = [](const Mat& Y) { return Mat(Mat::Ones(4, Y.cols())); };
    CHECK(adjoint_mismatch(bad) > 1e-3);
    CHECK_THROWS(lsqr(bad, Mat::Random(8, 1), 10));
    CHECK(adjoint_mismatch(dense_operator(Mat::Random(8, 4))) < 1e-12);
}

TEST_CASE("matrix exponential")
{
    Mat A(2, 2);
    A << 0, 1, -1, 0;
    Mat E = expm(0.5 * A);
    CHECK(E(0, 0) == doctest::Approx(std::cos(0.5)));
    CHECK(E(0, 1) == doctest::Approx(std::sin(0.5)));
    Mat B = Mat::Random(6, 6);
    CHECK((expm(B) * expm(-B) - Mat::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("condition number")
{
    Vec d(3);
    d << 4.0, 2.0, 0.5;
    CHECK(cond2(Mat(d.asDiagonal())) == doctest::Approx(8.0));
    CHECK(std::isinf(cond2(Mat::Zero(3, 3))));
    CHECK(std::isinf(cond2(Mat::Random(2, 3))));
}

TEST_CASE("perturbation bound holds on random instances")
{
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 25; ++k) {
        auto I = testing::random_perturbed_instance(rng);
        const Mat Xhat = solve_dense_ls(I.F + I.dF, I.Z + I.dZ, 1e-14).X;
        const double err = (Xhat - I.X).norm() / I.X.norm();
        CHECK(err <= perturbation_bound(I.F, I.dF, I.X, I.dZ, I.O) * (1 + 1e-10));
    }
    Mat F = Mat::Identity(3, 3);
    CHECK(std::isinf(perturbation_bound(F, 2.0 * F, F, F, F)));
}

}
