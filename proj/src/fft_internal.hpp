#pragma once

#include "rgmc/volume.hpp"

namespace rgmc::detail {

// Centered DFT with explicit normalization: out = fftshift(FFT(ifftshift(in))) * scale.
// forward=false uses the conjugate (backward) exponent.
void fft3_shifted_raw(const Shape3& dims, const cdouble* in, cdouble* out, bool forward,
                      double scale);

}  // namespace rgmc::detail
