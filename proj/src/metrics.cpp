#include "rgmc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace rgmc {

namespace {

// Separable Gaussian correlation along one axis, zero boundary; callers only
// read positions where the window fits, so the boundary rule never shows.
void filter_axis(std::vector<double>& a, const Shape3& dims, int axis,
                 const std::vector<double>& taps) {
    const int n = dims[axis];
    const int half = static_cast<int>(taps.size()) / 2;
    const std::size_t stride = (axis == 0) ? 1
                               : (axis == 1) ? static_cast<std::size_t>(dims[0])
                                             : static_cast<std::size_t>(dims[0]) * dims[1];
    const int n_other1 = (axis == 0) ? dims[1] : dims[0];
    const int n_other2 = (axis == 2) ? dims[1] : dims[2];
    const std::size_t stride1 = (axis == 0) ? static_cast<std::size_t>(dims[0]) : 1;
    const std::size_t stride2 = (axis == 2) ? static_cast<std::size_t>(dims[0])
                                            : static_cast<std::size_t>(dims[0]) * dims[1];
    std::vector<double> line(n);
    for (int j2 = 0; j2 < n_other2; ++j2) {
        for (int j1 = 0; j1 < n_other1; ++j1) {
            const std::size_t base = j1 * stride1 + j2 * stride2;
            for (int i = 0; i < n; ++i) line[i] = a[base + i * stride];
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                for (int t = -half; t <= half; ++t) {
                    const int src = i + t;
                    if (src >= 0 && src < n) s += taps[t + half] * line[src];
                }
                a[base + i * stride] = s;
            }
        }
    }
}

}  // namespace

std::vector<double> magnitude(const ComplexVolume3D& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v.data[i]);
    return out;
}

double psnr(const std::vector<double>& x, const std::vector<double>& ref) {
    if (x.size() != ref.size() || x.empty()) {
        throw InvalidInputError("psnr: shape mismatch");
    }
    double peak = 0.0;
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        peak = std::max(peak, ref[i]);
        const double d = x[i] - ref[i];
        mse += d * d;
    }
    if (peak <= 0.0) throw InvalidInputError("psnr: reference is identically zero");
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(peak / std::sqrt(mse));
}

double ssim(const std::vector<double>& x, const std::vector<double>& ref, Shape3 dims,
            const SsimConfig& cfg) {
    const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    if (x.size() != total || ref.size() != total || total == 0) {
        throw InvalidInputError("ssim: shape mismatch");
    }
    if (cfg.window < 3 || cfg.window % 2 == 0) {
        throw InvalidParameterError("ssim: window must be odd and >= 3");
    }
    for (int a = 0; a < 3; ++a) {
        if (dims[a] != 1 && dims[a] < cfg.window) {
            throw InvalidParameterError("ssim: window larger than image axis");
        }
    }

    double range = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        range = std::max(range, ref[i]);
        if (cfg.range_from_pair) range = std::max(range, x[i]);
    }
    if (range <= 0.0) throw InvalidInputError("ssim: reference is identically zero");
    const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
    const double c2 = (cfg.k2 * range) * (cfg.k2 * range);

    std::vector<double> taps(cfg.window);
    const int half = cfg.window / 2;
    double norm = 0.0;
    for (int i = 0; i < cfg.window; ++i) {
        taps[i] = std::exp(-0.5 * (i - half) * (i - half) / (cfg.sigma * cfg.sigma));
        norm += taps[i];
    }
    for (double& t : taps) t /= norm;

    std::vector<double> mx = x, my = ref, mxx(total), myy(total), mxy(total);
    for (std::size_t i = 0; i < total; ++i) {
        mxx[i] = x[i] * x[i];
        myy[i] = ref[i] * ref[i];
        mxy[i] = x[i] * ref[i];
    }
    for (int a = 0; a < 3; ++a) {
        if (dims[a] == 1) continue;
        filter_axis(mx, dims, a, taps);
        filter_axis(my, dims, a, taps);
        filter_axis(mxx, dims, a, taps);
        filter_axis(myy, dims, a, taps);
        filter_axis(mxy, dims, a, taps);
    }

    Shape3 lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = (dims[a] == 1) ? 0 : half;
        hi[a] = (dims[a] == 1) ? 1 : dims[a] - half;
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (int z = lo[2]; z < hi[2]; ++z) {
        for (int y = lo[1]; y < hi[1]; ++y) {
            for (int xx = lo[0]; xx < hi[0]; ++xx) {
                const std::size_t i = static_cast<std::size_t>(xx) +
                                      static_cast<std::size_t>(dims[0]) *
                                          (y + static_cast<std::size_t>(dims[1]) * z);
                const double mu_x = mx[i], mu_y = my[i];
                const double var_x = mxx[i] - mu_x * mu_x;
                const double var_y = myy[i] - mu_y * mu_y;
                const double cov = mxy[i] - mu_x * mu_y;
                const double num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
                const double den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
                acc += num / den;
                ++count;
            }
        }
    }
    return acc / static_cast<double>(count);
}

std::vector<double> extract_slice(const std::vector<double>& vol, Shape3 dims, SlicePlane plane,
                                  int index, Shape3& slice_dims) {
    const int axis = (plane == SlicePlane::sagittal) ? 0 : (plane == SlicePlane::coronal) ? 1 : 2;
    if (index < 0 || index >= dims[axis]) throw InvalidInputError("extract_slice: index off grid");
    slice_dims = dims;
    slice_dims[axis] = 1;
    std::vector<double> out(static_cast<std::size_t>(slice_dims[0]) * slice_dims[1] *
                            slice_dims[2]);
    std::size_t o = 0;
    for (int z = 0; z < slice_dims[2]; ++z) {
        for (int y = 0; y < slice_dims[1]; ++y) {
            for (int x = 0; x < slice_dims[0]; ++x) {
                const int sx = (axis == 0) ? index : x;
                const int sy = (axis == 1) ? index : y;
                const int sz = (axis == 2) ? index : z;
                out[o++] = vol[static_cast<std::size_t>(sx) +
                               static_cast<std::size_t>(dims[0]) *
                                   (sy + static_cast<std::size_t>(dims[1]) * sz)];
            }
        }
    }
    return out;
}

QualityReport quality_report(const ComplexVolume3D& x, const ComplexVolume3D& ref, int slice_x,
                             int slice_y, int slice_z, const SsimConfig& cfg) {
    if (x.dims != ref.dims) throw InvalidInputError("quality_report: shape mismatch");
    const std::vector<double> mx = magnitude(x);
    const std::vector<double> mr = magnitude(ref);

    QualityReport rep;
    rep.slice_x = (slice_x >= 0) ? slice_x : ref.dims[0] / 2;
    rep.slice_y = (slice_y >= 0) ? slice_y : ref.dims[1] / 2;
    rep.slice_z = (slice_z >= 0) ? slice_z : ref.dims[2] / 2;

    rep.psnr_volume = psnr(mx, mr);
    rep.ssim_volume = ssim(mx, mr, x.dims, cfg);

    Shape3 sd{};
    auto slice_pair = [&](SlicePlane plane, int idx, double& p, double& s) {
        const std::vector<double> a = extract_slice(mx, x.dims, plane, idx, sd);
        const std::vector<double> b = extract_slice(mr, x.dims, plane, idx, sd);
        p = psnr(a, b);
        s = ssim(a, b, sd, cfg);
    };
    slice_pair(SlicePlane::sagittal, rep.slice_x, rep.psnr_sagittal, rep.ssim_sagittal);
    slice_pair(SlicePlane::coronal, rep.slice_y, rep.psnr_coronal, rep.ssim_coronal);
    slice_pair(SlicePlane::axial, rep.slice_z, rep.psnr_axial, rep.ssim_axial);
    return rep;
}

}  // namespace rgmc
