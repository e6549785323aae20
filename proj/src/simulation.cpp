#include "rgmc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rgmc {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::uint64_t Rng::next_u64() {
    // splitmix64; fixed algorithm keeps streams identical across platforms.
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
}

void PhantomSpec::validate() const {
    if (n_channels < 1) throw InvalidParameterError("PhantomSpec: need at least one channel");
    if (supersample < 1) throw InvalidParameterError("PhantomSpec: supersample must be >= 1");
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 2) throw InvalidParameterError("PhantomSpec: dims must be >= 2");
        if (!(voxel_mm[a] > 0.0)) throw InvalidParameterError("PhantomSpec: voxel must be > 0");
    }
    for (const Ellipsoid& e : ellipsoids) {
        if (static_cast<int>(e.intensity.size()) < n_channels) {
            throw InvalidParameterError("PhantomSpec: ellipsoid intensity list shorter than channels");
        }
        for (int a = 0; a < 3; ++a) {
            if (!(e.semi_axes_mm[a] > 0.0)) {
                throw InvalidParameterError("PhantomSpec: ellipsoid semi-axes must be > 0");
            }
            if (!std::isfinite(e.center_mm[a]) || !std::isfinite(e.orientation_rad[a])) {
                throw InvalidParameterError("PhantomSpec: non-finite ellipsoid parameter");
            }
        }
        // Support radius of the rotated ellipsoid along each axis must stay
        // inside the FOV half-extent.
        const Mat3 r = rotation_matrix(e.orientation_rad);
        for (int a = 0; a < 3; ++a) {
            double reach = 0.0;
            for (int j = 0; j < 3; ++j) {
                reach += (r.m[a][j] * e.semi_axes_mm[j]) * (r.m[a][j] * e.semi_axes_mm[j]);
            }
            reach = std::sqrt(reach);
            const double half_fov = 0.5 * dims[a] * voxel_mm[a];
            if (std::abs(e.center_mm[a]) + reach > half_fov) {
                throw InvalidParameterError("PhantomSpec: ellipsoid extends outside the FOV");
            }
        }
        for (double v : e.intensity) {
            if (!std::isfinite(v)) throw InvalidParameterError("PhantomSpec: non-finite intensity");
        }
    }
}

std::vector<ComplexVolume3D> make_phantom(const PhantomSpec& spec) {
    spec.validate();
    std::vector<ComplexVolume3D> out;
    out.reserve(spec.n_channels);
    for (int c = 0; c < spec.n_channels; ++c) {
        out.emplace_back(spec.dims, spec.voxel_mm);
    }

    std::vector<Ellipsoid> shapes = spec.ellipsoids;
    if (spec.lesion && spec.n_channels >= 1) {
        Ellipsoid lesion;
        const double s = 0.5 * std::min({spec.dims[0] * spec.voxel_mm[0],
                                         spec.dims[1] * spec.voxel_mm[1],
                                         spec.dims[2] * spec.voxel_mm[2]});
        lesion.center_mm = {-0.30 * s, -0.25 * s, 0.15 * s};
        lesion.semi_axes_mm = {0.07 * s, 0.07 * s, 0.07 * s};
        lesion.intensity.assign(spec.n_channels, 0.0);
        lesion.intensity[0] = 0.6;
        shapes.push_back(lesion);
    }

    const int ss = spec.supersample;
    const double inv_ss = 1.0 / ss;
    const double sub_w = 1.0 / (ss * ss * ss);
    for (const Ellipsoid& e : shapes) {
        const Mat3 rt = rotation_matrix(e.orientation_rad).transposed();
        // Bounding box in voxels to keep rasterization local.
        std::array<int, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            double reach = 0.0;
            for (int j = 0; j < 3; ++j) {
                reach += (rt.m[j][a] * e.semi_axes_mm[j]) * (rt.m[j][a] * e.semi_axes_mm[j]);
            }
            reach = std::sqrt(reach) + spec.voxel_mm[a];
            lo[a] = std::max(0, static_cast<int>(std::floor((e.center_mm[a] - reach) / spec.voxel_mm[a])) +
                                    spec.dims[a] / 2);
            hi[a] = std::min(spec.dims[a] - 1,
                             static_cast<int>(std::ceil((e.center_mm[a] + reach) / spec.voxel_mm[a])) +
                                 spec.dims[a] / 2);
        }
        for (int z = lo[2]; z <= hi[2]; ++z) {
            for (int y = lo[1]; y <= hi[1]; ++y) {
                for (int x = lo[0]; x <= hi[0]; ++x) {
                    // Sub-voxel coverage fraction.
                    int inside = 0;
                    for (int sz = 0; sz < ss; ++sz) {
                        const double pz =
                            (z - spec.dims[2] / 2 + (sz + 0.5) * inv_ss - 0.5) * spec.voxel_mm[2] -
                            e.center_mm[2];
                        for (int sy = 0; sy < ss; ++sy) {
                            const double py = (y - spec.dims[1] / 2 + (sy + 0.5) * inv_ss - 0.5) *
                                                  spec.voxel_mm[1] -
                                              e.center_mm[1];
                            for (int sx = 0; sx < ss; ++sx) {
                                const double px = (x - spec.dims[0] / 2 + (sx + 0.5) * inv_ss - 0.5) *
                                                      spec.voxel_mm[0] -
                                                  e.center_mm[0];
                                const Vec3 q = rt.apply({px, py, pz});
                                const double d =
                                    (q[0] / e.semi_axes_mm[0]) * (q[0] / e.semi_axes_mm[0]) +
                                    (q[1] / e.semi_axes_mm[1]) * (q[1] / e.semi_axes_mm[1]) +
                                    (q[2] / e.semi_axes_mm[2]) * (q[2] / e.semi_axes_mm[2]);
                                if (d <= 1.0) ++inside;
                            }
                        }
                    }
                    if (inside == 0) continue;
                    const double cov = inside * sub_w;
                    const std::size_t idx = out[0].index(x, y, z);
                    for (int c = 0; c < spec.n_channels; ++c) {
                        out[c].data[idx] += cov * e.intensity[c];
                    }
                }
            }
        }
    }
    return out;
}

PhantomSpec default_two_contrast_spec(Shape3 dims, Vec3 voxel_mm, bool lesion) {
    PhantomSpec spec;
    spec.dims = dims;
    spec.voxel_mm = voxel_mm;
    spec.n_channels = 2;
    spec.lesion = lesion;
    const double sx = 0.5 * dims[0] * voxel_mm[0];
    const double sy = 0.5 * dims[1] * voxel_mm[1];
    const double sz = 0.5 * dims[2] * voxel_mm[2];
    const double s = std::min({sx, sy, sz});

    auto add = [&](Vec3 c, Vec3 a, Vec3 ang, double i0, double i1) {
        Ellipsoid e;
        e.center_mm = {c[0] * s, c[1] * s, c[2] * s};
        e.semi_axes_mm = {a[0] * s, a[1] * s, a[2] * s};
        e.orientation_rad = ang;
        e.intensity = {i0, i1};
        spec.ellipsoids.push_back(e);
    };
    // Head shell, brain, two tilted ventricles, two small structures. Every
    // interface carries a nonzero jump in both channels.
    add({0, 0, 0}, {0.86, 0.92, 0.88}, {0, 0, 0}, 0.8, 1.0);
    add({0, 0, 0}, {0.72, 0.80, 0.74}, {0, 0, 0}, 0.4, -0.3);
    add({-0.20, 0.06, 0.10}, {0.10, 0.24, 0.17}, {0.3, 0, 0}, -0.7, -0.35);
    add({0.20, 0.06, 0.10}, {0.10, 0.24, 0.17}, {-0.3, 0, 0}, -0.7, -0.35);
    add({0.0, -0.38, -0.18}, {0.12, 0.10, 0.14}, {0.2, 0.4, 0}, 0.5, -0.25);
    add({0.26, -0.18, 0.26}, {0.08, 0.12, 0.09}, {0, 0.5, 0.3}, -0.45, 0.3);
    return spec;
}

MotionScript make_motion_script(std::size_t n_t, std::size_t n_pose_changes, double max_tau_mm,
                                double max_phi_deg, std::uint64_t seed) {
    if (n_pose_changes < 1) {
        throw InvalidParameterError("make_motion_script: need at least one pose change");
    }
    if (n_pose_changes > n_t) {
        throw InvalidParameterError("make_motion_script: more pose changes than time samples");
    }
    if (!(max_tau_mm > 0.0) || !(max_phi_deg > 0.0)) {
        throw InvalidParameterError("make_motion_script: motion bounds must be positive");
    }

    Rng rng(seed);
    MotionScript script;
    script.seed = seed;
    script.poses.push_back(RigidParams{});
    for (std::size_t i = 0; i < n_pose_changes; ++i) {
        Vec3 tau{}, phi{};
        for (int a = 0; a < 3; ++a) tau[a] = rng.uniform(-max_tau_mm, max_tau_mm);
        for (int a = 0; a < 3; ++a) {
            phi[a] = rng.uniform(-max_phi_deg, max_phi_deg) * kPi / 180.0;
        }
        script.poses.emplace_back(tau, phi);
    }

    // Transition indices roughly equally spaced, jittered by up to 20% of a
    // segment, kept strictly increasing and inside (0, n_t).
    const double seg = static_cast<double>(n_t) / static_cast<double>(n_pose_changes + 1);
    std::size_t prev = 0;
    for (std::size_t i = 0; i < n_pose_changes; ++i) {
        const double base = seg * static_cast<double>(i + 1);
        const double jitter = rng.uniform(-0.2, 0.2) * seg;
        std::size_t idx = static_cast<std::size_t>(std::llround(
            std::clamp(base + jitter, static_cast<double>(prev + 1),
                       static_cast<double>(n_t - (n_pose_changes - i)))));
        idx = std::max(idx, prev + 1);
        script.transitions.push_back(idx);
        prev = idx;
    }

    script.trace.resize(n_t);
    std::size_t pose = 0;
    for (std::size_t t = 0; t < n_t; ++t) {
        if (pose < script.transitions.size() && t >= script.transitions[pose]) ++pose;
        script.trace[t] = script.poses[pose];
    }
    return script;
}

SamplingPattern make_sampling_pattern(Shape3 dims, PatternKind kind, int accel,
                                      std::uint64_t seed, int readout_axis, Vec3 voxel_mm,
                                      double density_power) {
    if (accel < 1) throw InvalidParameterError("make_sampling_pattern: accel must be >= 1");
    SamplingPattern p;
    p.dims = dims;
    p.voxel_mm = voxel_mm;
    p.readout_axis = readout_axis;
    p.kind = kind;
    const std::array<int, 2> pe = p.pe_axes();
    const int n1 = dims[pe[0]], n2 = dims[pe[1]];

    switch (kind) {
        case PatternKind::full: {
            for (int m1 = -n1 / 2; m1 < (n1 + 1) / 2; ++m1) {
                for (int m2 = -n2 / 2; m2 < (n2 + 1) / 2; ++m2) {
                    p.pe_coords.push_back({m1, m2});
                }
            }
            break;
        }
        case PatternKind::linear: {
            for (int m1 = -n1 / 2; m1 < (n1 + 1) / 2; m1 += accel) {
                for (int m2 = -n2 / 2; m2 < (n2 + 1) / 2; m2 += accel) {
                    p.pe_coords.push_back({m1, m2});
                }
            }
            break;
        }
        case PatternKind::randomized: {
            const std::size_t total = static_cast<std::size_t>(n1) * n2;
            if (static_cast<std::size_t>(accel) > total) {
                throw InvalidParameterError("make_sampling_pattern: accel exceeds line count");
            }
            const std::size_t budget = (total + accel - 1) / accel;
            // Weighted sampling without replacement via exponential sort keys;
            // ascending key order doubles as the (random) acquisition order.
            struct Entry {
                double key;
                std::array<int, 2> coord;
            };
            double k_max = 0.0;
            const double kx1 = 2.0 * kPi / (n1 * voxel_mm[pe[0]]);
            const double kx2 = 2.0 * kPi / (n2 * voxel_mm[pe[1]]);
            for (int m1 = -n1 / 2; m1 < (n1 + 1) / 2; ++m1) {
                for (int m2 = -n2 / 2; m2 < (n2 + 1) / 2; ++m2) {
                    k_max = std::max(k_max, std::hypot(m1 * kx1, m2 * kx2));
                }
            }
            Rng rng(seed);
            std::vector<Entry> entries;
            entries.reserve(total);
            for (int m1 = -n1 / 2; m1 < (n1 + 1) / 2; ++m1) {
                for (int m2 = -n2 / 2; m2 < (n2 + 1) / 2; ++m2) {
                    const double r = std::hypot(m1 * kx1, m2 * kx2) / k_max;
                    const double w = std::pow(1.0 + r, -density_power);
                    double u = rng.uniform();
                    while (u <= 0.0) u = rng.uniform();
                    entries.push_back({-std::log(u) / w, {m1, m2}});
                }
            }
            std::stable_sort(entries.begin(), entries.end(),
                             [](const Entry& a, const Entry& b) { return a.key < b.key; });
            for (std::size_t i = 0; i < budget; ++i) p.pe_coords.push_back(entries[i].coord);
            break;
        }
    }
    p.validate();
    return p;
}

KSpaceData simulate_acquisition(const ComplexVolume3D& u, const MotionTrace& trace,
                                const SamplingPattern& pattern, double noise_sigma,
                                std::uint64_t seed, const NufftConfig& cfg) {
    if (noise_sigma < 0.0) {
        throw InvalidParameterError("simulate_acquisition: noise sigma must be >= 0");
    }
    KSpaceData data = perturbed_fourier(u, trace, pattern, cfg);
    data.noise_sigma = noise_sigma;
    if (noise_sigma > 0.0) {
        Rng rng(seed);
        for (cdouble& s : data.samples) {
            s += noise_sigma * cdouble(rng.normal(), rng.normal());
        }
    }
    return data;
}

MotionTrace identity_trace(std::size_t n_t) { return MotionTrace(n_t); }

TraceErrorStats compare_traces(const MotionTrace& estimated, const MotionTrace& truth,
                               const std::vector<std::size_t>& transitions, std::size_t exclusion,
                               const RigidParams* offset) {
    if (estimated.size() != truth.size()) {
        throw InvalidInputError("compare_traces: length mismatch");
    }
    TraceErrorStats stats;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        bool near_transition = false;
        for (std::size_t tr : transitions) {
            const std::size_t lo = (tr > exclusion) ? tr - exclusion : 0;
            if (t >= lo && t < tr + exclusion) {
                near_transition = true;
                break;
            }
        }
        if (near_transition) continue;
        const RigidParams expect = offset ? compose(truth[t], *offset) : truth[t];
        for (int a = 0; a < 3; ++a) {
            stats.max_tau_mm =
                std::max(stats.max_tau_mm, std::abs(estimated[t].tau_mm[a] - expect.tau_mm[a]));
            stats.max_phi_rad = std::max(
                stats.max_phi_rad,
                std::abs(wrap_angle(estimated[t].phi_rad[a] - expect.phi_rad[a])));
        }
        ++stats.compared;
    }
    return stats;
}

}  // namespace rgmc
