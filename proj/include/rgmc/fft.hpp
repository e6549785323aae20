#pragma once

#include "rgmc/volume.hpp"

namespace rgmc {

// Unitary, DC-centered 3D discrete Fourier transform. Frequencies follow
// k_j = 2*pi*m_j/(n_j*voxel_j) with integer m_j in [-n_j/2, n_j/2), stored
// with m = 0 at index n_j/2; spatial coordinates are FOV-centered.
ComplexVolume3D fft3_centered(const ComplexVolume3D& vol);

// Exact inverse of fft3_centered.
ComplexVolume3D ifft3_centered(const ComplexVolume3D& vol);

// Central crop (or zero-pad) of a spectrum array in its stored centered
// layout. Shared bins are copied verbatim.
ComplexVolume3D spectrum_crop_pad(const ComplexVolume3D& spectrum, const Shape3& new_dims);

// Resamples an image volume to new grid dims by unitary spectral crop/pad.
// Values on shared low frequencies are preserved exactly.
ComplexVolume3D spectral_resize(const ComplexVolume3D& image, const Shape3& new_dims);

}  // namespace rgmc
