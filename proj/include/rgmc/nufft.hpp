#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rgmc/volume.hpp"

namespace rgmc {

// Gridding parameters for the non-uniform transforms. The defaults give
// roughly 1e-6 relative accuracy; `tolerance` documents that expectation and
// is used by callers when budgeting test thresholds.
struct NufftConfig {
    double oversampling = 2.0;
    int kernel_width = 6;
    double tolerance = 1e-6;

    void validate() const;
    friend bool operator==(const NufftConfig&, const NufftConfig&) = default;
};

// Frequency samples in rad/mm. A point is in band when |k_a * voxel_a| <= pi
// for every axis (the Nyquist box of the grid).
struct NonUniformPoints {
    std::vector<Vec3> coords;

    std::size_t size() const { return coords.size(); }
};

// Throws BandLimitError if any point leaves the representable band.
void require_in_band(std::span<const Vec3> kpts, const Vec3& voxel_mm);
bool in_band(const Vec3& k, const Vec3& voxel_mm);

// Kaiser-Bessel gridding engine for one (dims, voxel, config) combination.
// Evaluation is pure and thread-safe; construction precomputes the kernel
// table, roll-off correction, and FFT plans for the oversampled grid.
class NufftEngine {
  public:
    NufftEngine(Shape3 dims, Vec3 voxel_mm, NufftConfig cfg);
    ~NufftEngine();
    NufftEngine(const NufftEngine&) = delete;
    NufftEngine& operator=(const NufftEngine&) = delete;

    // s_k = sum_x u(x) * exp(-i k.x), x FOV-centered in mm.
    std::vector<cdouble> type2(const ComplexVolume3D& vol, std::span<const Vec3> kpts) const;

    // Shared-points batch: one gridding pass per volume, one interpolation
    // pass evaluating all volumes together.
    std::vector<std::vector<cdouble>> type2_batch(
        std::span<const ComplexVolume3D* const> vols, std::span<const Vec3> kpts) const;

    // Exact adjoint of type2 (including the kernel approximation).
    ComplexVolume3D type2_adjoint(std::span<const cdouble> samples,
                                  std::span<const Vec3> kpts) const;

    const Shape3& dims() const { return dims_; }
    const Vec3& voxel_mm() const { return voxel_mm_; }
    const NufftConfig& config() const { return cfg_; }

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Shape3 dims_;
    Vec3 voxel_mm_;
    NufftConfig cfg_;
};

// Shared engine cache keyed by (dims, voxel, config).
std::shared_ptr<const NufftEngine> get_nufft_engine(Shape3 dims, Vec3 voxel_mm,
                                                    const NufftConfig& cfg);

// Convenience wrappers over a cached engine.
std::vector<cdouble> nufft_type2(const ComplexVolume3D& vol, const NonUniformPoints& pts,
                                 const NufftConfig& cfg);
ComplexVolume3D nufft_type2_adjoint(std::span<const cdouble> samples, const NonUniformPoints& pts,
                                    Shape3 dims, Vec3 voxel_mm, const NufftConfig& cfg);

}  // namespace rgmc
