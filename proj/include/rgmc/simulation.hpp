#pragma once

#include <cstdint>
#include <vector>

#include "rgmc/forward_model.hpp"
#include "rgmc/geometry.hpp"
#include "rgmc/volume.hpp"

namespace rgmc {

// Deterministic random stream with bit-reproducible output across platforms
// (mt19937_64 is pinned by the standard; the double conversions are ours).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // standard normal, Box-Muller

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct Ellipsoid {
    Vec3 center_mm{};
    Vec3 semi_axes_mm{};
    Vec3 orientation_rad{};             // plane angles, same convention as RigidParams
    std::vector<double> intensity;      // one value per contrast channel
};

struct PhantomSpec {
    Shape3 dims{64, 64, 64};
    Vec3 voxel_mm{1.0, 1.0, 1.0};
    int n_channels = 2;
    std::vector<Ellipsoid> ellipsoids;
    bool lesion = false;     // adds a channel-0-only blob (breaks shared edges locally)
    int supersample = 2;     // sub-voxel coverage sampling per axis

    void validate() const;
};

// Anti-aliased additive ellipsoid phantom, one volume per contrast channel.
// Channels share the exact same geometry, so their edge sets coincide.
std::vector<ComplexVolume3D> make_phantom(const PhantomSpec& spec);

// Two-contrast 64^3-style preset scaled to the requested grid.
PhantomSpec default_two_contrast_spec(Shape3 dims, Vec3 voxel_mm = {1.0, 1.0, 1.0},
                                      bool lesion = false);

struct MotionScript {
    MotionTrace trace;
    std::vector<std::size_t> transitions;  // first index of each new pose
    std::vector<RigidParams> poses;        // poses[0] is always the identity
    std::uint64_t seed = 0;
};

// Stepwise trace emulating an instructed-motion protocol: identity first
// pose, then `n_pose_changes` random poses within the given bounds, with
// transition times roughly equally spaced plus jitter.
MotionScript make_motion_script(std::size_t n_t, std::size_t n_pose_changes, double max_tau_mm,
                                double max_phi_deg, std::uint64_t seed);

// full: every phase-encoding location in lexicographic order.
// linear: every accel-th location per axis (total acceleration accel^2).
// randomized: variable-density sampling without replacement, density
// proportional to (1 + |k_pe|/k_max)^-density_power, in random order.
SamplingPattern make_sampling_pattern(Shape3 dims, PatternKind kind, int accel,
                                      std::uint64_t seed, int readout_axis = 0,
                                      Vec3 voxel_mm = {1.0, 1.0, 1.0},
                                      double density_power = 2.0);

// data = perturbed_fourier(u, trace, pattern) + sigma * (g1 + i g2).
KSpaceData simulate_acquisition(const ComplexVolume3D& u, const MotionTrace& trace,
                                const SamplingPattern& pattern, double noise_sigma,
                                std::uint64_t seed, const NufftConfig& cfg);

MotionTrace identity_trace(std::size_t n_t);

struct TraceErrorStats {
    double max_tau_mm = 0.0;   // worst per-axis translation error
    double max_phi_rad = 0.0;  // worst per-plane rotation error
    std::size_t compared = 0;  // indices outside the transition windows
};

// Worst-case per-channel error between an estimated and a true trace,
// ignoring indices within `exclusion` of any pose transition. When `offset`
// is non-null the estimate is compared against compose(truth_t, offset),
// which is the expected gauge for a misregistered reference.
TraceErrorStats compare_traces(const MotionTrace& estimated, const MotionTrace& truth,
                               const std::vector<std::size_t>& transitions, std::size_t exclusion,
                               const RigidParams* offset = nullptr);

}  // namespace rgmc
