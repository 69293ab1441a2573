#include "mz/state_space.hpp"

#include <doctest.h>

using namespace mz;

TEST_SUITE("state_space") {

TEST_CASE("split selects resolved and unresolved components")
{
    ProjectionSpec p(4, {1, 3});
    Vec u(4);
    u << 1, 2, 3, 4;
    auto [phi, phiT] = p.split(u);
    CHECK(phi(0) == 2);
    CHECK(phi(1) == 4);
    CHECK(phiT(0) == 1);
    CHECK(phiT(1) == 3);
}

TEST_CASE("merge inverts split")
{
    ProjectionSpec p = ProjectionSpec::leading(30, 5);
    Vec u = Vec::Random(30);
    auto [phi, phiT] = p.split(u);
    CHECK((p.merge(phi, phiT) - u).norm() == 0.0);

    ProjectionSpec q(30, {5, 10, 15, 20, 25});
    CHECK(q.d() == 5);
    CHECK(q.d_tilde() == 25);
    auto [a, b] = q.split(u);
    CHECK((q.merge(a, b) - u).norm() == 0.0);
}

TEST_CASE("projection rejects bad indices")
{
    CHECK_THROWS_AS(ProjectionSpec(4, {4}), ShapeError);
    CHECK_THROWS_AS(ProjectionSpec(4, {1, 1}), ShapeError);
}

TEST_CASE("extract_blocks on identity")
{
    ProjectionSpec p(5, {0, 3});
    Blocks b = extract_blocks(Mat::Identity(5, 5), p);
    CHECK(b.R.isApprox(Mat::Identity(2, 2)));
    CHECK(b.Rt.norm() == 0.0);
    CHECK(b.U.norm() == 0.0);
    CHECK(b.Ut.isApprox(Mat::Identity(3, 3)));
}

TEST_CASE("extract_blocks on the rotation")
{
    Mat A(2, 2);
    A << 0, 1, -1, 0;
    Blocks b = extract_blocks(A, ProjectionSpec(2, {0}));
    CHECK(b.R(0, 0) == 0.0);
    CHECK(b.Rt(0, 0) == 1.0);
    CHECK(b.U(0, 0) == -1.0);
    CHECK(b.Ut(0, 0) == 0.0);
}

TEST_CASE("assemble_blocks inverts extract_blocks")
{
    ProjectionSpec p(6, {1, 4});
    Mat A = Mat::Random(6, 6);
    CHECK((assemble_blocks(extract_blocks(A, p), p) - A).norm() == 0.0);

    Mat D = Mat::Zero(6, 6);
    D.topLeftCorner(2, 2) = Mat::Random(2, 2);
    D.bottomRightCorner(4, 4) = Mat::Random(4, 4);
    Blocks b = extract_blocks(D, ProjectionSpec::leading(6, 2));
    CHECK(b.Rt.norm() == 0.0);
    CHECK(b.U.norm() == 0.0);
}

TEST_CASE("time grid from dt truncates to whole steps")
{
    TimeGrid g = TimeGrid::from_dt(5.0, 3.125e-2);
    CHECK(g.NT == 160);
    CHECK(g.dt() == doctest::Approx(3.125e-2));
    TimeGrid w = TimeGrid::from_dt(2 * 3.141592653589793, 6.25e-2);
    CHECK(w.NT == 100);
    CHECK(w.T == doctest::Approx(6.25));
}

TEST_CASE("scheme names round trip")
{
    for (Scheme s : {Scheme::BackwardEuler, Scheme::Midpoint, Scheme::ForwardEuler})
        CHECK(scheme_from_string(to_string(s)) == s);
    CHECK_THROWS(scheme_from_string("rk4"));
    CHECK(node_offset(Scheme::Midpoint) == 0.5);
}

}
