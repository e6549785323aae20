#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rgmc/fft.hpp"
#include "rgmc/nufft.hpp"
#include "rgmc/simulation.hpp"

using namespace rgmc;

namespace {
constexpr double kPi = std::numbers::pi;

ComplexVolume3D random_volume(Shape3 dims, std::uint64_t seed) {
    ComplexVolume3D v(dims);
    Rng rng(seed);
    for (cdouble& c : v.data) c = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return v;
}

std::vector<Vec3> random_inband_points(std::size_t n, const Vec3& voxel, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec3> pts(n);
    for (Vec3& k : pts) {
        for (int a = 0; a < 3; ++a) k[a] = rng.uniform(-kPi, kPi) / voxel[a];
    }
    return pts;
}

std::vector<Vec3> grid_points(Shape3 dims, const Vec3& voxel) {
    std::vector<Vec3> pts;
    for (int mz = -dims[2] / 2; mz < (dims[2] + 1) / 2; ++mz)
        for (int my = -dims[1] / 2; my < (dims[1] + 1) / 2; ++my)
            for (int mx = -dims[0] / 2; mx < (dims[0] + 1) / 2; ++mx)
                pts.push_back({2.0 * kPi * mx / (dims[0] * voxel[0]),
                               2.0 * kPi * my / (dims[1] * voxel[1]),
                               2.0 * kPi * mz / (dims[2] * voxel[2])});
    return pts;
}
}  // namespace

TEST_CASE("nufft_type2 on exact grid frequencies reduces to the centered FFT") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 41);
    const NufftConfig cfg;
    NonUniformPoints pts{grid_points(v.dims, v.voxel_mm)};
    const std::vector<cdouble> got = nufft_type2(v, pts, cfg);
    const ComplexVolume3D ref = fft3_centered(v);
    // type2 returns plain sums; the unitary FFT differs by sqrt(N).
    const double scale = std::sqrt(static_cast<double>(v.size()));
    std::vector<cdouble> want;
    for (int mz = 0; mz < 8; ++mz)
        for (int my = 0; my < 8; ++my)
            for (int mx = 0; mx < 8; ++mx) want.push_back(ref.at(mx, my, mz) * scale);
    CHECK(oracle::rel_l2(got, want) < 1e-6);
}

TEST_CASE("nufft_type2 at k=0 returns the voxel sum") {
    const ComplexVolume3D v = random_volume({9, 8, 10}, 42);
    cdouble sum = 0.0;
    for (const cdouble& c : v.data) sum += c;
    NonUniformPoints pts{{Vec3{0.0, 0.0, 0.0}}};
    const std::vector<cdouble> got = nufft_type2(v, pts, NufftConfig{});
    CHECK(std::abs(got[0] - sum) / std::abs(sum) < 1e-6);
}

TEST_CASE("nufft_type2 matches direct summation on random points") {
    const ComplexVolume3D v = random_volume({16, 16, 16}, 43);
    const std::vector<Vec3> pts = random_inband_points(500, v.voxel_mm, 44);
    const std::vector<cdouble> got = nufft_type2(v, NonUniformPoints{pts}, NufftConfig{});
    const std::vector<cdouble> want = oracle::direct_type2(v, pts);
    CHECK(oracle::rel_l2(got, want) < 1e-5);
}

TEST_CASE("nufft_type2 with anisotropic voxel size matches direct summation") {
    ComplexVolume3D v = random_volume({12, 16, 10}, 45);
    v.voxel_mm = {1.5, 0.8, 2.0};
    const std::vector<Vec3> pts = random_inband_points(200, v.voxel_mm, 46);
    const std::vector<cdouble> got = nufft_type2(v, NonUniformPoints{pts}, NufftConfig{});
    CHECK(oracle::rel_l2(got, oracle::direct_type2(v, pts)) < 1e-5);
}

TEST_CASE("nufft_type2: empty points give an empty result") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 47);
    CHECK(nufft_type2(v, NonUniformPoints{}, NufftConfig{}).empty());
}

TEST_CASE("nufft_type2 rejects out-of-band points") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 48);
    NonUniformPoints pts{{Vec3{1.5 * kPi, 0.0, 0.0}}};
    CHECK_THROWS_AS(nufft_type2(v, pts, NufftConfig{}), BandLimitError);
}

TEST_CASE("nufft_type2_adjoint: zero samples give a zero volume") {
    const std::vector<Vec3> pts = random_inband_points(20, {1, 1, 1}, 49);
    const std::vector<cdouble> zeros(20, cdouble(0.0));
    const ComplexVolume3D out =
        nufft_type2_adjoint(zeros, NonUniformPoints{pts}, {8, 8, 8}, {1, 1, 1}, NufftConfig{});
    CHECK(norm2(out) == 0.0);
}

TEST_CASE("nufft_type2_adjoint satisfies the dot-product identity") {
    const ComplexVolume3D x = random_volume({8, 8, 8}, 50);
    const std::vector<Vec3> pts = random_inband_points(200, x.voxel_mm, 51);
    Rng rng(52);
    std::vector<cdouble> y(pts.size());
    for (cdouble& c : y) c = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));

    const std::vector<cdouble> ax = nufft_type2(x, NonUniformPoints{pts}, NufftConfig{});
    const ComplexVolume3D aty =
        nufft_type2_adjoint(y, NonUniformPoints{pts}, x.dims, x.voxel_mm, NufftConfig{});

    cdouble lhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += std::conj(y[i]) * ax[i];
    const cdouble rhs = dot(aty, x);

    double xn = norm2(x), yn = 0.0;
    for (const cdouble& c : y) yn += std::norm(c);
    yn = std::sqrt(yn);
    CHECK(std::abs(lhs - rhs) / (xn * yn) < 1e-6);
}

TEST_CASE("nufft_type2_adjoint of a DC sample matches direct adjoint summation") {
    const std::vector<Vec3> pts{{0.0, 0.0, 0.0}};
    const std::vector<cdouble> s{cdouble(1.0, 0.0)};
    const ComplexVolume3D got =
        nufft_type2_adjoint(s, NonUniformPoints{pts}, {8, 8, 8}, {1, 1, 1}, NufftConfig{});
    const ComplexVolume3D want = oracle::direct_type2_adjoint(s, pts, {8, 8, 8}, {1, 1, 1});
    CHECK(oracle::rel_l2(got, want) < 1e-5);
}

TEST_CASE("nufft_type2_adjoint rejects length mismatch") {
    const std::vector<Vec3> pts = random_inband_points(5, {1, 1, 1}, 53);
    const std::vector<cdouble> s(4, cdouble(1.0));
    CHECK_THROWS_AS(
        nufft_type2_adjoint(s, NonUniformPoints{pts}, {8, 8, 8}, {1, 1, 1}, NufftConfig{}),
        InvalidInputError);
}

TEST_CASE("NufftConfig validation") {
    NufftConfig bad;
    bad.oversampling = 1.1;
    CHECK_THROWS_AS(bad.validate(), InvalidParameterError);
    bad = NufftConfig{};
    bad.kernel_width = 1;
    CHECK_THROWS_AS(bad.validate(), InvalidParameterError);
}

TEST_CASE("nufft linearity") {
    const ComplexVolume3D a = random_volume({8, 8, 8}, 54);
    const ComplexVolume3D b = random_volume({8, 8, 8}, 55);
    const std::vector<Vec3> pts = random_inband_points(50, a.voxel_mm, 56);
    const NufftConfig cfg;
    const cdouble ca(0.7, -0.3), cb(-1.1, 0.2);
    ComplexVolume3D mix = a;
    for (std::size_t i = 0; i < mix.data.size(); ++i) {
        mix.data[i] = ca * a.data[i] + cb * b.data[i];
    }
    const auto fa = nufft_type2(a, NonUniformPoints{pts}, cfg);
    const auto fb = nufft_type2(b, NonUniformPoints{pts}, cfg);
    const auto fm = nufft_type2(mix, NonUniformPoints{pts}, cfg);
    std::vector<cdouble> want(fa.size());
    for (std::size_t i = 0; i < fa.size(); ++i) want[i] = ca * fa[i] + cb * fb[i];
    CHECK(oracle::rel_l2(fm, want) < 1e-12);
}
