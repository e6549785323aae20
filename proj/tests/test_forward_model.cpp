#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rgmc/fft.hpp"
#include "rgmc/forward_model.hpp"
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

// Smooth Gaussian-blob test object: spectrally compact, so image-domain
// oracles are not polluted by corner aliasing.
ComplexVolume3D smooth_volume(Shape3 dims) {
    ComplexVolume3D v(dims);
    for (int z = 0; z < dims[2]; ++z) {
        for (int y = 0; y < dims[1]; ++y) {
            for (int x = 0; x < dims[0]; ++x) {
                const double dx = v.coord_mm(x, 0), dy = v.coord_mm(y, 1), dz = v.coord_mm(z, 2);
                const double s1 = std::exp(-(dx * dx + dy * dy + dz * dz) / 18.0);
                const double s2 =
                    0.6 * std::exp(-((dx - 2) * (dx - 2) + (dy + 1.5) * (dy + 1.5) + dz * dz) / 8.0);
                v.at(x, y, z) = s1 + s2;
            }
        }
    }
    return v;
}

SamplingPattern full_pattern(Shape3 dims, Vec3 voxel = {1, 1, 1}) {
    return make_sampling_pattern(dims, PatternKind::full, 1, 0, 0, voxel);
}

// Trigonometric (Dirichlet) interpolation of the grid volume at arbitrary
// points, evaluated by direct summation over the centered spectrum.
cdouble trig_interpolate(const ComplexVolume3D& spectrum_unitary, const Vec3& x_mm,
                         const ComplexVolume3D& geometry) {
    const Shape3 d = geometry.dims;
    cdouble acc = 0.0;
    for (int mz = -d[2] / 2; mz < (d[2] + 1) / 2; ++mz) {
        for (int my = -d[1] / 2; my < (d[1] + 1) / 2; ++my) {
            for (int mx = -d[0] / 2; mx < (d[0] + 1) / 2; ++mx) {
                const double ph = 2.0 * kPi *
                                  (mx * x_mm[0] / (d[0] * geometry.voxel_mm[0]) +
                                   my * x_mm[1] / (d[1] * geometry.voxel_mm[1]) +
                                   mz * x_mm[2] / (d[2] * geometry.voxel_mm[2]));
                acc += spectrum_unitary.at(mx + d[0] / 2, my + d[1] / 2, mz + d[2] / 2) *
                       std::polar(1.0, ph);
            }
        }
    }
    return acc / std::sqrt(static_cast<double>(geometry.size()));
}
}  // namespace

TEST_CASE("perturbed_fourier with identity trace reduces to the centered FFT") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 61);
    const SamplingPattern pat = full_pattern(v.dims);
    const KSpaceData out = perturbed_fourier(v, identity_trace(pat.n_lines()), pat, NufftConfig{});
    const ComplexVolume3D ref = fft3_centered(v);

    double err = 0.0, den = 0.0;
    for (std::size_t t = 0; t < out.n_t(); ++t) {
        for (std::size_t r = 0; r < out.n_r(); ++r) {
            // Reorder: line t covers pe coords, readout along x.
            const auto pe = pat.pe_axes();
            std::array<int, 3> mi{};
            mi[pe[0]] = pat.pe_coords[t][0] + v.dims[pe[0]] / 2;
            mi[pe[1]] = pat.pe_coords[t][1] + v.dims[pe[1]] / 2;
            mi[pat.readout_axis] = static_cast<int>(r);
            const cdouble want = ref.at(mi[0], mi[1], mi[2]);
            err += std::norm(out.at(t, r) - want);
            den += std::norm(want);
        }
    }
    CHECK(std::sqrt(err / den) < 1e-6);
    CHECK(out.out_of_band_zeroed == 0);
}

TEST_CASE("perturbed_fourier obeys the Fourier shift theorem") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 62);
    const SamplingPattern pat = full_pattern(v.dims);
    const double dx = v.voxel_mm[0];  // one voxel along x
    MotionTrace trace(pat.n_lines(), RigidParams({dx, 0, 0}, {0, 0, 0}));

    const KSpaceData moved = perturbed_fourier(v, trace, pat, NufftConfig{});
    const KSpaceData still = perturbed_fourier(v, identity_trace(pat.n_lines()), pat, NufftConfig{});

    double worst = 0.0;
    for (std::size_t t = 0; t < moved.n_t(); ++t) {
        for (std::size_t r = 0; r < moved.n_r(); ++r) {
            const Vec3 k = pat.kpoint(t, static_cast<int>(r));
            const cdouble want = still.at(t, r) * std::polar(1.0, -k[0] * dx);
            worst = std::max(worst, std::abs(moved.at(t, r) - want));
        }
    }
    const double scale = std::sqrt(norm2(still) * norm2(still) / still.samples.size());
    CHECK(worst / scale < 1e-6);
}

TEST_CASE("perturbed_fourier matches an image-domain resampling oracle") {
    const ComplexVolume3D v = smooth_volume({16, 16, 16});
    const SamplingPattern pat = full_pattern(v.dims);

    // Stepwise trace with two poses.
    const RigidParams pose2({1.0, -0.8, 0.5}, {3.0 * kPi / 180.0, -2.0 * kPi / 180.0, 4.0 * kPi / 180.0});
    MotionTrace trace(pat.n_lines());
    for (std::size_t t = pat.n_lines() / 2; t < pat.n_lines(); ++t) trace[t] = pose2;

    const KSpaceData got = perturbed_fourier(v, trace, pat, NufftConfig{});

    // Oracle: trig-interpolate the moved object on the grid (exact resampling
    // of the band-limited model), then take the naive DFT per pose.
    const ComplexVolume3D spec = oracle::naive_dft3(v, -1);
    auto moved_volume = [&](const RigidParams& p) {
        ComplexVolume3D m(v.dims, v.voxel_mm);
        const Mat3 rt = rotation_matrix(p.phi_rad).transposed();
        for (int z = 0; z < v.dims[2]; ++z) {
            for (int y = 0; y < v.dims[1]; ++y) {
                for (int x = 0; x < v.dims[0]; ++x) {
                    Vec3 q{m.coord_mm(x, 0) - p.tau_mm[0], m.coord_mm(y, 1) - p.tau_mm[1],
                           m.coord_mm(z, 2) - p.tau_mm[2]};
                    m.at(x, y, z) = trig_interpolate(spec, rt.apply(q), v);
                }
            }
        }
        return m;
    };
    const ComplexVolume3D still_spec = spec;
    const ComplexVolume3D moved_spec = oracle::naive_dft3(moved_volume(pose2), -1);

    double err = 0.0, den = 0.0;
    const auto pe = pat.pe_axes();
    for (std::size_t t = 0; t < got.n_t(); ++t) {
        const ComplexVolume3D& ref = (t < pat.n_lines() / 2) ? still_spec : moved_spec;
        for (std::size_t r = 0; r < got.n_r(); ++r) {
            std::array<int, 3> mi{};
            mi[pe[0]] = pat.pe_coords[t][0] + v.dims[pe[0]] / 2;
            mi[pe[1]] = pat.pe_coords[t][1] + v.dims[pe[1]] / 2;
            mi[pat.readout_axis] = static_cast<int>(r);
            err += std::norm(got.at(t, r) - ref.at(mi[0], mi[1], mi[2]));
            den += std::norm(ref.at(mi[0], mi[1], mi[2]));
        }
    }
    CHECK(std::sqrt(err / den) < 1e-3);
}

TEST_CASE("perturbed_fourier_adjoint: zero data and motion-free inversion") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 63);
    const SamplingPattern pat = full_pattern(v.dims);
    KSpaceData data = perturbed_fourier(v, identity_trace(pat.n_lines()), pat, NufftConfig{});

    KSpaceData zeros = data;
    std::fill(zeros.samples.begin(), zeros.samples.end(), cdouble(0.0));
    CHECK(norm2(perturbed_fourier_adjoint(zeros, identity_trace(pat.n_lines()), pat,
                                          NufftConfig{})) == 0.0);

    // Full sampling + unitary normalization: adjoint inverts the transform.
    const ComplexVolume3D rec =
        perturbed_fourier_adjoint(data, identity_trace(pat.n_lines()), pat, NufftConfig{});
    CHECK(oracle::rel_l2(rec, v) < 1e-6);
}

TEST_CASE("perturbed_fourier / adjoint dot-product identity with random trace") {
    const ComplexVolume3D x = random_volume({8, 8, 8}, 64);
    const SamplingPattern pat =
        make_sampling_pattern({8, 8, 8}, PatternKind::randomized, 2, 7, 0, {1, 1, 1});
    Rng rng(65);
    MotionTrace trace(pat.n_lines());
    for (RigidParams& p : trace) {
        p = RigidParams({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)},
                        {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                         rng.uniform(-0.05, 0.05)});
    }

    const KSpaceData ax = perturbed_fourier(x, trace, pat, NufftConfig{});
    KSpaceData y = ax;
    for (cdouble& c : y.samples) c = cdouble(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const ComplexVolume3D aty = perturbed_fourier_adjoint(y, trace, pat, NufftConfig{});

    cdouble lhs = 0.0;
    for (std::size_t i = 0; i < y.samples.size(); ++i) {
        lhs += std::conj(y.samples[i]) * ax.samples[i];
    }
    const cdouble rhs = dot(aty, x);
    double yn = 0.0;
    for (const cdouble& c : y.samples) yn += std::norm(c);
    CHECK(std::abs(lhs - rhs) / (norm2(x) * std::sqrt(yn)) < 1e-6);
}

TEST_CASE("batched evaluation equals the per-line loop") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 66);
    const SamplingPattern pat =
        make_sampling_pattern({8, 8, 8}, PatternKind::randomized, 2, 3, 0, {1, 1, 1});
    Rng rng(67);
    MotionTrace trace(pat.n_lines());
    for (RigidParams& p : trace) {
        p = RigidParams({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)},
                        {rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04),
                         rng.uniform(-0.04, 0.04)});
    }
    const KSpaceData batched = perturbed_fourier(v, trace, pat, NufftConfig{});

    for (std::size_t t = 0; t < pat.n_lines(); t += 7) {
        SamplingPattern single = pat;
        single.pe_coords = {pat.pe_coords[t]};
        const KSpaceData one =
            perturbed_fourier(v, MotionTrace{trace[t]}, single, NufftConfig{});
        for (std::size_t r = 0; r < one.n_r(); ++r) {
            CHECK(std::abs(one.at(0, r) - batched.at(t, r)) <=
                  1e-10 * std::max(1.0, std::abs(batched.at(t, r))));
        }
    }
}

TEST_CASE("misfit: self-consistency, zero image, and loop oracle") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 68);
    const SamplingPattern pat =
        make_sampling_pattern({8, 8, 8}, PatternKind::randomized, 2, 5, 0, {1, 1, 1});
    Rng rng(69);
    MotionTrace trace(pat.n_lines());
    for (RigidParams& p : trace) {
        p = RigidParams({rng.uniform(-1, 1), 0, 0}, {rng.uniform(-0.03, 0.03), 0, 0});
    }
    const KSpaceData data = perturbed_fourier(v, trace, pat, NufftConfig{});

    double dn = 0.0;
    for (const cdouble& c : data.samples) dn += std::norm(c);
    CHECK(misfit(v, trace, data, NufftConfig{}) < 1e-10 * dn);

    const ComplexVolume3D zero(v.dims, v.voxel_mm);
    CHECK(misfit(zero, trace, data, NufftConfig{}) == doctest::Approx(0.5 * dn).epsilon(1e-10));

    // Naive per-sample loop oracle on a perturbed image.
    const ComplexVolume3D u2 = random_volume({8, 8, 8}, 70);
    const KSpaceData model = perturbed_fourier(u2, trace, pat, NufftConfig{});
    double want = 0.0;
    for (std::size_t i = 0; i < model.samples.size(); ++i) {
        want += 0.5 * std::norm(model.samples[i] - data.samples[i]);
    }
    CHECK(misfit(u2, trace, data, NufftConfig{}) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("misfit is invariant under consistent time relabeling") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 71);
    SamplingPattern pat =
        make_sampling_pattern({8, 8, 8}, PatternKind::randomized, 2, 9, 0, {1, 1, 1});
    Rng rng(72);
    MotionTrace trace(pat.n_lines());
    for (RigidParams& p : trace) {
        p = RigidParams({rng.uniform(-1, 1), rng.uniform(-1, 1), 0}, {rng.uniform(-0.05, 0.05), 0, 0});
    }
    KSpaceData data = perturbed_fourier(v, trace, pat, NufftConfig{});
    const ComplexVolume3D u2 = random_volume({8, 8, 8}, 73);
    const double base = misfit(u2, trace, data, NufftConfig{});

    // Reverse the acquisition order consistently.
    SamplingPattern rpat = pat;
    std::reverse(rpat.pe_coords.begin(), rpat.pe_coords.end());
    MotionTrace rtrace(trace.rbegin(), trace.rend());
    KSpaceData rdata;
    rdata.pattern = rpat;
    rdata.samples.resize(data.samples.size());
    const std::size_t n_r = data.n_r();
    for (std::size_t t = 0; t < data.n_t(); ++t) {
        for (std::size_t r = 0; r < n_r; ++r) {
            rdata.samples[(data.n_t() - 1 - t) * n_r + r] = data.at(t, r);
        }
    }
    CHECK(misfit(u2, rtrace, rdata, NufftConfig{}) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("grad_u: stationarity at the truth and finite differences") {
    const ComplexVolume3D v = smooth_volume({12, 12, 12});
    const SamplingPattern pat =
        make_sampling_pattern(v.dims, PatternKind::randomized, 2, 13, 0, {1, 1, 1});
    Rng rng(74);
    MotionTrace trace(pat.n_lines());
    for (RigidParams& p : trace) {
        p = RigidParams({rng.uniform(-1, 1), 0, rng.uniform(-1, 1)}, {0, rng.uniform(-0.04, 0.04), 0});
    }
    const KSpaceData data = perturbed_fourier(v, trace, pat, NufftConfig{});

    CHECK(norm2(grad_u(v, trace, data, NufftConfig{})) < 1e-6 * norm2(v));

    const ComplexVolume3D u = random_volume(v.dims, 75);
    const ComplexVolume3D g = grad_u(u, trace, data, NufftConfig{});
    const double eps = 1e-4;
    for (int dir = 0; dir < 5; ++dir) {
        ComplexVolume3D d = random_volume(v.dims, 76 + dir);
        const double dn = norm2(d);
        for (cdouble& c : d.data) c /= dn;
        ComplexVolume3D up = u, dn_ = u;
        for (std::size_t i = 0; i < u.data.size(); ++i) {
            up.data[i] += eps * d.data[i];
            dn_.data[i] -= eps * d.data[i];
        }
        const double fd = (misfit(up, trace, data, NufftConfig{}) -
                           misfit(dn_, trace, data, NufftConfig{})) /
                          (2.0 * eps);
        const double an = dot(g, d).real();
        CHECK(std::abs(fd - an) / std::max(std::abs(fd), 1e-12) < 1e-5);
    }
}

TEST_CASE("grad_u equals adjoint-of-forward composition on zero data") {
    const ComplexVolume3D u = random_volume({8, 8, 8}, 80);
    const SamplingPattern pat =
        make_sampling_pattern({8, 8, 8}, PatternKind::randomized, 2, 15, 0, {1, 1, 1});
    Rng rng(81);
    MotionTrace trace(pat.n_lines());
    for (RigidParams& p : trace) {
        p = RigidParams({rng.uniform(-1, 1), 0, 0}, {0, 0, rng.uniform(-0.05, 0.05)});
    }
    KSpaceData zero_data = perturbed_fourier(u, trace, pat, NufftConfig{});
    std::fill(zero_data.samples.begin(), zero_data.samples.end(), cdouble(0.0));

    const ComplexVolume3D g = grad_u(u, trace, zero_data, NufftConfig{});
    const KSpaceData fu = perturbed_fourier(u, trace, pat, NufftConfig{});
    const ComplexVolume3D want = perturbed_fourier_adjoint(fu, trace, pat, NufftConfig{});
    CHECK(oracle::rel_l2(g, want) < 1e-10);
}

TEST_CASE("grad_theta: stationarity at the simulating trace") {
    const ComplexVolume3D v = smooth_volume({12, 12, 12});
    const SamplingPattern pat = full_pattern(v.dims);
    Rng rng(82);
    MotionTrace trace(pat.n_lines());
    for (std::size_t t = pat.n_lines() / 3; t < pat.n_lines(); ++t) {
        trace[t] = RigidParams({0.7, -0.4, 0.2}, {0.02, 0.015, -0.01});
    }
    const KSpaceData data = perturbed_fourier(v, trace, pat, NufftConfig{});
    const ThetaDerivatives th = grad_theta(v, trace, data, NufftConfig{});
    double dn = 0.0;
    for (const cdouble& c : data.samples) dn += std::norm(c);
    for (const auto& g : th.grad) {
        for (double gc : g) CHECK(std::abs(gc) < 1e-6 * dn);
    }
    CHECK(th.misfit_value < 1e-10 * dn);
}

TEST_CASE("grad_theta translation components match finite differences") {
    const ComplexVolume3D v = smooth_volume({12, 12, 12});
    const SamplingPattern pat =
        make_sampling_pattern(v.dims, PatternKind::randomized, 4, 31, 0, {1, 1, 1});
    MotionTrace truth(pat.n_lines());
    for (std::size_t t = pat.n_lines() / 2; t < pat.n_lines(); ++t) {
        truth[t] = RigidParams({0.9, -0.6, 0.3}, {0, 0, 0});
    }
    const KSpaceData data = perturbed_fourier(v, truth, pat, NufftConfig{});

    MotionTrace trace(pat.n_lines());  // all-zero evaluation point
    const ThetaDerivatives th = grad_theta(v, trace, data, NufftConfig{});
    const double eps = 1e-4;
    for (std::size_t t = 0; t < pat.n_lines(); t += std::max<std::size_t>(1, pat.n_lines() / 6)) {
        for (int c = 0; c < 3; ++c) {
            MotionTrace up = trace, dn = trace;
            up[t].tau_mm[c] += eps;
            dn[t].tau_mm[c] -= eps;
            const double fd = (misfit(v, up, data, NufftConfig{}) -
                               misfit(v, dn, data, NufftConfig{})) /
                              (2.0 * eps);
            CHECK(std::abs(th.grad[t][c] - fd) / std::max(std::abs(fd), 1e-8) < 1e-4);
        }
    }
}

TEST_CASE("grad_theta rotation components match finite differences") {
    const ComplexVolume3D v = smooth_volume({16, 16, 16});
    const SamplingPattern pat =
        make_sampling_pattern(v.dims, PatternKind::randomized, 8, 37, 0, {1, 1, 1});
    MotionTrace truth(pat.n_lines());
    for (std::size_t t = pat.n_lines() / 2; t < pat.n_lines(); ++t) {
        truth[t] = RigidParams({0.4, 0.2, -0.3}, {0.03, -0.02, 0.025});
    }
    const KSpaceData data = perturbed_fourier(v, truth, pat, NufftConfig{});

    MotionTrace trace(pat.n_lines());
    for (std::size_t t = 0; t < pat.n_lines(); ++t) {
        trace[t] = RigidParams({0.1, 0.0, 0.0}, {0.01, 0.005, -0.008});
    }
    const ThetaDerivatives th = grad_theta(v, trace, data, NufftConfig{});
    const double eps = 1e-4;
    for (std::size_t t = 0; t < pat.n_lines(); t += std::max<std::size_t>(1, pat.n_lines() / 4)) {
        for (int c = 0; c < 3; ++c) {
            MotionTrace up = trace, dn = trace;
            up[t].phi_rad[c] += eps;
            dn[t].phi_rad[c] -= eps;
            const double fd = (misfit(v, up, data, NufftConfig{}) -
                               misfit(v, dn, data, NufftConfig{})) /
                              (2.0 * eps);
            CHECK(std::abs(th.grad[t][3 + c] - fd) / std::max(std::abs(fd), 1e-8) < 1e-3);
        }
    }
}

TEST_CASE("SamplingPattern validation rejects duplicates and off-grid coords") {
    SamplingPattern p = full_pattern({4, 4, 4});
    p.pe_coords.push_back(p.pe_coords.front());
    CHECK_THROWS_AS(p.validate(), InvalidInputError);
    p = full_pattern({4, 4, 4});
    p.pe_coords[0] = {7, 0};
    CHECK_THROWS_AS(p.validate(), InvalidInputError);
}

TEST_CASE("shape mismatches raise invalid-input errors") {
    const ComplexVolume3D v = random_volume({8, 8, 8}, 90);
    const SamplingPattern pat = full_pattern({8, 8, 8});
    MotionTrace bad(pat.n_lines() - 1);
    CHECK_THROWS_AS(perturbed_fourier(v, bad, pat, NufftConfig{}), InvalidInputError);

    const ComplexVolume3D wrong = random_volume({6, 8, 8}, 91);
    CHECK_THROWS_AS(perturbed_fourier(wrong, identity_trace(pat.n_lines()), pat, NufftConfig{}),
                    InvalidInputError);
}

TEST_CASE("rigid_resample round trip is accurate for smooth volumes") {
    const ComplexVolume3D v = smooth_volume({16, 16, 16});
    const RigidParams p({1.2, -0.7, 0.4}, {0.05, -0.03, 0.04});
    const ComplexVolume3D moved = rigid_resample(v, p, NufftConfig{});
    const ComplexVolume3D back = rigid_resample(moved, inverse(p), NufftConfig{});
    CHECK(oracle::rel_l2(back, v) < 1e-3);
}
