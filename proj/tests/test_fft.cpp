#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rgmc/fft.hpp"
#include "rgmc/simulation.hpp"

using namespace rgmc;

namespace {
ComplexVolume3D random_volume(Shape3 dims, std::uint64_t seed) {
    ComplexVolume3D v(dims);
    Rng rng(seed);
    for (cdouble& c : v.data) c = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return v;
}
}  // namespace

TEST_CASE("fft3_centered: constant volume concentrates in the DC bin") {
    ComplexVolume3D v({8, 8, 8});
    for (cdouble& c : v.data) c = 1.0;
    const ComplexVolume3D s = fft3_centered(v);
    CHECK(s.at(4, 4, 4).real() == doctest::Approx(std::pow(8.0, 1.5)).epsilon(1e-12));
    double off_dc = 0.0;
    for (int z = 0; z < 8; ++z)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                if (x != 4 || y != 4 || z != 4) off_dc = std::max(off_dc, std::abs(s.at(x, y, z)));
    CHECK(off_dc < 1e-12);
}

TEST_CASE("fft3_centered: central impulse gives a flat spectrum") {
    ComplexVolume3D v({8, 8, 8});
    v.at(4, 4, 4) = 1.0;
    const ComplexVolume3D s = fft3_centered(v);
    const double want = std::pow(8.0, -1.5);
    for (const cdouble& c : s.data) {
        CHECK(std::abs(c) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("fft3_centered matches the naive DFT oracle") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 17);
    CHECK(oracle::rel_l2(fft3_centered(v), oracle::naive_dft3(v, -1)) < 1e-10);
}

TEST_CASE("fft3_centered on odd dims matches the naive DFT oracle") {
    const ComplexVolume3D v = random_volume({5, 6, 7}, 18);
    CHECK(oracle::rel_l2(fft3_centered(v), oracle::naive_dft3(v, -1)) < 1e-10);
    CHECK(oracle::rel_l2(ifft3_centered(fft3_centered(v)), v) < 1e-12);
}

TEST_CASE("fft3_centered round trip and Parseval") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 21);
    const ComplexVolume3D s = fft3_centered(v);
    CHECK(norm2(s) == doctest::Approx(norm2(v)).epsilon(1e-12));
    CHECK(oracle::rel_l2(ifft3_centered(s), v) < 1e-12);
}

TEST_CASE("fft3_centered rejects non-finite input") {
    ComplexVolume3D v({4, 4, 4});
    v.at(1, 1, 1) = cdouble(std::nan(""), 0.0);
    CHECK_THROWS_AS(fft3_centered(v), InvalidInputError);
}

TEST_CASE("spectral upscale then central crop recovers the input exactly") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 33);
    const ComplexVolume3D up = ifft3_centered(spectrum_crop_pad(fft3_centered(v), {16, 16, 16}));
    const ComplexVolume3D back = ifft3_centered(spectrum_crop_pad(fft3_centered(up), {8, 8, 8}));
    CHECK(oracle::rel_l2(back, v) < 1e-12);
}
