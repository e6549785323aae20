#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rgmc/geometry.hpp"
#include "rgmc/simulation.hpp"

using namespace rgmc;

namespace {
constexpr double kPi = std::numbers::pi;

Mat3 explicit_product(const Vec3& phi) {
    // Independent assembly of R_yz * R_xz * R_xy from scratch.
    const double ca = std::cos(phi[0]), sa = std::sin(phi[0]);
    const double cb = std::cos(phi[1]), sb = std::sin(phi[1]);
    const double cc = std::cos(phi[2]), sc = std::sin(phi[2]);
    Mat3 rxy{}, rxz{}, ryz{};
    rxy.m = {{{ca, -sa, 0}, {sa, ca, 0}, {0, 0, 1}}};
    rxz.m = {{{cb, 0, -sb}, {0, 1, 0}, {sb, 0, cb}}};
    ryz.m = {{{1, 0, 0}, {0, cc, -sc}, {0, sc, cc}}};
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) out.m[i][j] += ryz.m[i][k] * rxz.m[k][l] * rxy.m[l][j];
    return out;
}

double max_abs_diff(const Mat3& a, const Mat3& b) {
    double m = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a.m[i][j] - b.m[i][j]));
    return m;
}

double orthogonality_residual(const Mat3& r) {
    const Mat3 rtr = r.transposed() * r;
    Mat3 eye = Mat3::identity();
    return max_abs_diff(rtr, eye);
}
}  // namespace

TEST_CASE("rotation_matrix: zero angles give the exact identity") {
    const Mat3 r = rotation_matrix({0.0, 0.0, 0.0});
    CHECK(max_abs_diff(r, Mat3::identity()) == 0.0);
}

TEST_CASE("rotation_matrix: quarter turn in the axial plane maps e_x to e_y") {
    const Mat3 r = rotation_matrix({kPi / 2.0, 0.0, 0.0});
    const Vec3 ey = r.apply({1.0, 0.0, 0.0});
    CHECK(ey[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(ey[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ey[2] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("rotation_matrix: matches the explicit plane-rotation product") {
    const Vec3 phi{0.1, 0.2, 0.3};
    const Mat3 r = rotation_matrix(phi);
    CHECK(max_abs_diff(r, explicit_product(phi)) < 1e-15);
    CHECK(orthogonality_residual(r) < 1e-12);
    CHECK(r.det() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotation_matrix: orthogonal for random angles") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const Vec3 phi{rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
        const Mat3 r = rotation_matrix(phi);
        CHECK(orthogonality_residual(r) < 1e-12);
    }
}

TEST_CASE("rotation_matrix: rejects non-finite input") {
    CHECK_THROWS_AS(rotation_matrix({std::nan(""), 0.0, 0.0}), InvalidParameterError);
}

TEST_CASE("rotation_matrix_derivatives agree with central differences") {
    const Vec3 phi{0.37, -0.81, 0.22};
    const auto derivs = rotation_matrix_derivatives(phi);
    const double eps = 1e-6;
    for (int a = 0; a < 3; ++a) {
        Vec3 hi = phi, lo = phi;
        hi[a] += eps;
        lo[a] -= eps;
        const Mat3 rp = rotation_matrix(hi), rm = rotation_matrix(lo);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double fd = (rp.m[i][j] - rm.m[i][j]) / (2.0 * eps);
                CHECK(derivs[a].m[i][j] == doctest::Approx(fd).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("angles_from_rotation_matrix inverts rotation_matrix") {
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        const Vec3 phi{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
        const Vec3 back = angles_from_rotation_matrix(rotation_matrix(phi));
        for (int a = 0; a < 3; ++a) CHECK(back[a] == doctest::Approx(phi[a]).epsilon(1e-12));
    }
}

TEST_CASE("apply_rigid: identity and pure translation") {
    const std::vector<Vec3> pts{{1.0, 2.0, 3.0}};
    const auto same = apply_rigid(RigidParams{}, pts);
    CHECK(same[0] == Vec3{1.0, 2.0, 3.0});

    const RigidParams shift({1.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
    const auto moved = apply_rigid(shift, {{Vec3{0.0, 0.0, 0.0}}});
    CHECK(moved[0] == Vec3{1.0, 0.0, 0.0});
}

TEST_CASE("apply_rigid matches a dense matrix-vector oracle") {
    const RigidParams p({1.0, -2.0, 0.5}, {0.1, 0.2, 0.3});
    const Vec3 x{1.0, 1.0, 1.0};
    const Mat3 r = explicit_product(p.phi_rad);
    Vec3 want{};
    for (int i = 0; i < 3; ++i) {
        want[i] = r.m[i][0] * x[0] + r.m[i][1] * x[1] + r.m[i][2] * x[2] + p.tau_mm[i];
    }
    const auto got = apply_rigid(p, {{x}});
    for (int i = 0; i < 3; ++i) CHECK(got[0][i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("apply_rigid_inverse undoes apply_rigid") {
    Rng rng(99);
    for (int i = 0; i < 20; ++i) {
        const RigidParams p({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)},
                            {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const Vec3 x{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
        const auto fwd = apply_rigid(p, {{x}});
        const auto back = apply_rigid_inverse(p, {{fwd[0]}});
        for (int a = 0; a < 3; ++a) CHECK(back[0][a] == doctest::Approx(x[a]).epsilon(1e-10));
    }
}

TEST_CASE("inverse_rotate_kpoints: identity, half-turn, and round trip") {
    const std::vector<Vec3> ks{{0.3, -0.2, 0.9}};
    const auto same = inverse_rotate_kpoints({0.0, 0.0, 0.0}, ks);
    CHECK(same[0] == ks[0]);

    const auto half_turn = inverse_rotate_kpoints({kPi, 0.0, 0.0}, {{Vec3{0.4, 0.5, 0.0}}});
    CHECK(half_turn[0][0] == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(half_turn[0][1] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(half_turn[0][2] == doctest::Approx(0.0).epsilon(1e-12));

    const Vec3 phi{0.4, -0.7, 1.1};
    const Mat3 r = rotation_matrix(phi);
    const Vec3 rotated = r.apply(ks[0]);
    const auto back = inverse_rotate_kpoints(phi, {{rotated}});
    for (int a = 0; a < 3; ++a) CHECK(back[0][a] == doctest::Approx(ks[0][a]).epsilon(1e-12));
}

TEST_CASE("angle canonicalization wraps into (-pi, pi] with identical matrices") {
    const RigidParams p({0, 0, 0}, {3.0 * kPi, -kPi, 5.5 * kPi});
    CHECK(p.phi_rad[0] == doctest::Approx(kPi));
    CHECK(p.phi_rad[1] == doctest::Approx(kPi));  // -pi wraps to +pi
    CHECK(p.phi_rad[2] > -kPi);
    CHECK(p.phi_rad[2] <= kPi);
    const Mat3 a = rotation_matrix({3.0 * kPi, -kPi, 5.5 * kPi});
    const Mat3 b = rotation_matrix(p.phi_rad);
    CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("compose and inverse are consistent with point application") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const RigidParams a({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)},
                            {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const RigidParams b({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)},
                            {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const Vec3 x{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
        const auto via_two = apply_rigid(a, {{apply_rigid(b, {{x}})[0]}});
        const auto via_one = apply_rigid(compose(a, b), {{x}});
        for (int c = 0; c < 3; ++c) {
            CHECK(via_one[0][c] == doctest::Approx(via_two[0][c]).epsilon(1e-10));
        }
        const auto round = apply_rigid(inverse(a), {{apply_rigid(a, {{x}})[0]}});
        for (int c = 0; c < 3; ++c) CHECK(round[0][c] == doctest::Approx(x[c]).epsilon(1e-10));
    }
}
