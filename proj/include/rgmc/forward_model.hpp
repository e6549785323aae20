#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "rgmc/geometry.hpp"
#include "rgmc/nufft.hpp"
#include "rgmc/volume.hpp"

namespace rgmc {

enum class PatternKind { full, randomized, linear };

std::string to_string(PatternKind k);
PatternKind pattern_kind_from_string(const std::string& s);

// Ordered list of phase-encoding locations. Entry t defines readout line K_t:
// the full Cartesian line along `readout_axis` at the centered integer
// phase-encoding coordinates pe_coords[t] (given for the two non-readout axes
// in ascending axis order). The list order is the acquisition order and hence
// the motion time axis.
struct SamplingPattern {
    Shape3 dims{0, 0, 0};
    Vec3 voxel_mm{1.0, 1.0, 1.0};
    int readout_axis = 0;
    PatternKind kind = PatternKind::full;
    std::vector<std::array<int, 2>> pe_coords;

    std::array<int, 2> pe_axes() const;
    std::size_t n_lines() const { return pe_coords.size(); }
    int n_readout() const { return dims[readout_axis]; }

    // k (rad/mm) of sample r on line t; readout coordinate m_r = r - n_r/2.
    Vec3 kpoint(std::size_t t, int r) const;

    // Rejects duplicate phase-encoding coordinates and out-of-grid entries.
    void validate() const;
};

// Acquired (or modeled) complex samples, shape (n_t, n_r) row-major, aligned
// with the embedded pattern.
struct KSpaceData {
    SamplingPattern pattern;
    std::vector<cdouble> samples;
    double noise_sigma = 0.0;
    // Rotated frequencies that left the representable band and were zeroed.
    std::size_t out_of_band_zeroed = 0;

    std::size_t n_t() const { return pattern.n_lines(); }
    std::size_t n_r() const { return static_cast<std::size_t>(pattern.n_readout()); }
    cdouble& at(std::size_t t, std::size_t r) { return samples[t * n_r() + r]; }
    const cdouble& at(std::size_t t, std::size_t r) const { return samples[t * n_r() + r]; }

    void validate() const;
};

// Samples the perturbed Fourier transform of `vol` on the pattern:
// out(t, k) = exp(-i k . tau_t) * Fu(R_t^T k), with Fu the unitary centered
// transform. All rotated points across all readouts are evaluated in a single
// batched type-2 NUFFT. Rotated frequencies outside the band are zeroed and
// counted in the result.
KSpaceData perturbed_fourier(const ComplexVolume3D& vol, const MotionTrace& trace,
                             const SamplingPattern& pattern, const NufftConfig& cfg);

// Exact adjoint of perturbed_fourier for fixed trace (conjugate translation
// phases, adjoint gridding at the rotated points, same band zeroing).
ComplexVolume3D perturbed_fourier_adjoint(const KSpaceData& data, const MotionTrace& trace,
                                          const SamplingPattern& pattern, const NufftConfig& cfg);

// Data misfit: sum_t 0.5 * || F_theta_t u |_Kt - d_t ||^2.
double misfit(const ComplexVolume3D& u, const MotionTrace& trace, const KSpaceData& data,
              const NufftConfig& cfg);

// Gradient of the misfit with respect to the image: F^H (F u - d).
ComplexVolume3D grad_u(const ComplexVolume3D& u, const MotionTrace& trace, const KSpaceData& data,
                       const NufftConfig& cfg);

// Per-readout gradient (and Gauss-Newton curvature diagonal) of the misfit
// with respect to the six motion parameters, ordered as RigidParams::flat().
struct ThetaDerivatives {
    std::vector<std::array<double, 6>> grad;
    std::vector<std::array<double, 6>> curvature;
    double misfit_value = 0.0;
};

ThetaDerivatives grad_theta(const ComplexVolume3D& u, const MotionTrace& trace,
                            const KSpaceData& data, const NufftConfig& cfg);

// Applies a rigid transform to a volume by spectral resampling (phase ramp
// plus NUFFT evaluation at rotated grid frequencies).
ComplexVolume3D rigid_resample(const ComplexVolume3D& vol, const RigidParams& params,
                               const NufftConfig& cfg);

}  // namespace rgmc
