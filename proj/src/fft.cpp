#include "rgmc/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "fft_internal.hpp"

namespace rgmc {

namespace {

// FFTW's planner is not thread-safe; executions on distinct buffers are.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    ~PlanPair() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
};

std::shared_ptr<PlanPair> plans_for(const Shape3& dims) {
    static std::map<Shape3, std::shared_ptr<PlanPair>> cache;
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto it = cache.find(dims);
    if (it != cache.end()) return it->second;

    auto pp = std::make_shared<PlanPair>();
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    fftw_complex* buf = fftw_alloc_complex(n);
    // FFTW uses row-major (last index fastest); our layout is x-fastest, so
    // pass dims reversed. FFTW_ESTIMATE keeps planning deterministic.
    pp->fwd = fftw_plan_dft_3d(dims[2], dims[1], dims[0], buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    pp->bwd = fftw_plan_dft_3d(dims[2], dims[1], dims[0], buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(buf);
    cache[dims] = pp;
    return pp;
}

struct FftwBuffer {
    fftw_complex* p = nullptr;
    explicit FftwBuffer(std::size_t n) : p(fftw_alloc_complex(n)) {}
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace

namespace detail {

// out[i] = in[(i + c) mod n] per axis: ifftshift for centered input, and,
// applied after the transform, fftshift of the standard-order spectrum
// (both use the same index map since c = floor(n/2) and shifts are modular).
void shift_copy(const Shape3& dims, const cdouble* in, cdouble* out) {
    const int nx = dims[0], ny = dims[1], nz = dims[2];
    const int cx = nx / 2, cy = ny / 2, cz = nz / 2;
    for (int z = 0; z < nz; ++z) {
        const int zs = (z + cz) % nz;
        for (int y = 0; y < ny; ++y) {
            const int ys = (y + cy) % ny;
            const cdouble* src = in + static_cast<std::size_t>(nx) * (ys + static_cast<std::size_t>(ny) * zs);
            cdouble* dst = out + static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z);
            for (int x = 0; x < nx; ++x) dst[x] = src[(x + cx) % nx];
        }
    }
}

// Inverse of shift_copy: out[(i + c) mod n] = in[i].
void unshift_copy(const Shape3& dims, const cdouble* in, cdouble* out) {
    const int nx = dims[0], ny = dims[1], nz = dims[2];
    const int cx = nx / 2, cy = ny / 2, cz = nz / 2;
    for (int z = 0; z < nz; ++z) {
        const int zs = (z + cz) % nz;
        for (int y = 0; y < ny; ++y) {
            const int ys = (y + cy) % ny;
            cdouble* dst = out + static_cast<std::size_t>(nx) * (ys + static_cast<std::size_t>(ny) * zs);
            const cdouble* src = in + static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z);
            for (int x = 0; x < nx; ++x) dst[(x + cx) % nx] = src[x];
        }
    }
}

void fft3_shifted_raw(const Shape3& dims, const cdouble* in, cdouble* out, bool forward,
                      double scale) {
    auto plans = plans_for(dims);
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    FftwBuffer buf(n);
    shift_copy(dims, in, reinterpret_cast<cdouble*>(buf.p));
    fftw_execute_dft(forward ? plans->fwd : plans->bwd, buf.p, buf.p);
    std::vector<cdouble> tmp(n);
    unshift_copy(dims, reinterpret_cast<const cdouble*>(buf.p), tmp.data());
    for (std::size_t i = 0; i < n; ++i) out[i] = tmp[i] * scale;
}

}  // namespace detail

ComplexVolume3D fft3_centered(const ComplexVolume3D& vol) {
    require_valid_grid(vol, "fft3_centered");
    require_finite(vol, "fft3_centered");
    ComplexVolume3D out(vol.dims, vol.voxel_mm);
    const double scale = 1.0 / std::sqrt(static_cast<double>(vol.size()));
    detail::fft3_shifted_raw(vol.dims, vol.data.data(), out.data.data(), true, scale);
    return out;
}

ComplexVolume3D ifft3_centered(const ComplexVolume3D& vol) {
    require_valid_grid(vol, "ifft3_centered");
    require_finite(vol, "ifft3_centered");
    ComplexVolume3D out(vol.dims, vol.voxel_mm);
    const double scale = 1.0 / std::sqrt(static_cast<double>(vol.size()));
    detail::fft3_shifted_raw(vol.dims, vol.data.data(), out.data.data(), false, scale);
    return out;
}

ComplexVolume3D spectrum_crop_pad(const ComplexVolume3D& spectrum, const Shape3& new_dims) {
    require_valid_grid(spectrum, "spectrum_crop_pad");
    ComplexVolume3D out(new_dims, spectrum.voxel_mm);
    // Copy the overlap of the two centered frequency boxes.
    Shape3 lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
        const int n_in = spectrum.dims[a], n_out = new_dims[a];
        // m in [-n/2, ceil(n/2)) for each grid; overlap of the two ranges.
        lo[a] = -std::min(n_in / 2, n_out / 2);
        hi[a] = std::min((n_in + 1) / 2, (n_out + 1) / 2);
    }
    for (int mz = lo[2]; mz < hi[2]; ++mz) {
        for (int my = lo[1]; my < hi[1]; ++my) {
            for (int mx = lo[0]; mx < hi[0]; ++mx) {
                out.at(mx + new_dims[0] / 2, my + new_dims[1] / 2, mz + new_dims[2] / 2) =
                    spectrum.at(mx + spectrum.dims[0] / 2, my + spectrum.dims[1] / 2,
                                mz + spectrum.dims[2] / 2);
            }
        }
    }
    return out;
}

ComplexVolume3D spectral_resize(const ComplexVolume3D& image, const Shape3& new_dims) {
    if (image.dims == new_dims) return image;
    ComplexVolume3D out = ifft3_centered(spectrum_crop_pad(fft3_centered(image), new_dims));
    // Keep the physical FOV: voxel size scales inversely with grid dims.
    for (int a = 0; a < 3; ++a) {
        out.voxel_mm[a] = image.voxel_mm[a] * image.dims[a] / new_dims[a];
    }
    return out;
}

}  // namespace rgmc
