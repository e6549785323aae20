#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rgmc/volume.hpp"

namespace rgmc {

// Magnitude image of a complex volume (shape preserved).
std::vector<double> magnitude(const ComplexVolume3D& v);

// Peak-referenced PSNR in dB on magnitude arrays of identical shape:
// 20*log10(max(ref)/rmse). Returns +infinity when the inputs are identical.
double psnr(const std::vector<double>& x, const std::vector<double>& ref);

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    bool range_from_pair = false;  // default dynamic range = max(ref)
};

// Mean local SSIM with a Gaussian window, evaluated where the full window
// fits. Axes of size 1 are treated as absent (so 2D slices work unchanged);
// every other axis must be at least `window` wide.
double ssim(const std::vector<double>& x, const std::vector<double>& ref, Shape3 dims,
            const SsimConfig& cfg = {});

enum class SlicePlane { sagittal, coronal, axial };

// Extracts a 2D slice as a Shape3 array with the fixed axis collapsed to 1.
std::vector<double> extract_slice(const std::vector<double>& vol, Shape3 dims, SlicePlane plane,
                                  int index, Shape3& slice_dims);

struct QualityReport {
    double psnr_volume = 0.0;
    double ssim_volume = 0.0;
    double psnr_sagittal = 0.0, psnr_coronal = 0.0, psnr_axial = 0.0;
    double ssim_sagittal = 0.0, ssim_coronal = 0.0, ssim_axial = 0.0;
    int slice_x = 0, slice_y = 0, slice_z = 0;
};

// Full-volume plus central-slice metrics of |x| against |ref|. Negative slice
// indices select the central slice of each orientation.
QualityReport quality_report(const ComplexVolume3D& x, const ComplexVolume3D& ref,
                             int slice_x = -1, int slice_y = -1, int slice_z = -1,
                             const SsimConfig& cfg = {});

}  // namespace rgmc
