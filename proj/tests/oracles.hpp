#pragma once

// Independent brute-force reference implementations used only by tests.
// These stay deliberately naive (direct summation, dense algebra) so they
// share no code path with the gridding/FFT implementations they check.

#include <complex>
#include <numbers>
#include <vector>

#include "rgmc/volume.hpp"

namespace oracle {

using rgmc::cdouble;
using rgmc::ComplexVolume3D;
using rgmc::Shape3;
using rgmc::Vec3;

// Direct centered DFT, unitary normalization; sign=-1 forward, +1 inverse.
inline ComplexVolume3D naive_dft3(const ComplexVolume3D& in, int sign) {
    const Shape3 d = in.dims;
    ComplexVolume3D out(d, in.voxel_mm);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in.size()));
    for (int mz = 0; mz < d[2]; ++mz) {
        for (int my = 0; my < d[1]; ++my) {
            for (int mx = 0; mx < d[0]; ++mx) {
                cdouble acc = 0.0;
                for (int z = 0; z < d[2]; ++z) {
                    for (int y = 0; y < d[1]; ++y) {
                        for (int x = 0; x < d[0]; ++x) {
                            const double ph =
                                2.0 * std::numbers::pi *
                                (static_cast<double>((mx - d[0] / 2) * (x - d[0] / 2)) / d[0] +
                                 static_cast<double>((my - d[1] / 2) * (y - d[1] / 2)) / d[1] +
                                 static_cast<double>((mz - d[2] / 2) * (z - d[2] / 2)) / d[2]);
                            acc += in.at(x, y, z) * std::polar(1.0, sign * ph);
                        }
                    }
                }
                out.at(mx, my, mz) = acc * scale;
            }
        }
    }
    return out;
}

// Direct evaluation of sum_x u(x) exp(-i k.x) with FOV-centered x in mm.
inline std::vector<cdouble> direct_type2(const ComplexVolume3D& u, const std::vector<Vec3>& kpts) {
    std::vector<cdouble> out(kpts.size());
    for (std::size_t p = 0; p < kpts.size(); ++p) {
        cdouble acc = 0.0;
        for (int z = 0; z < u.dims[2]; ++z) {
            for (int y = 0; y < u.dims[1]; ++y) {
                for (int x = 0; x < u.dims[0]; ++x) {
                    const double ph = kpts[p][0] * u.coord_mm(x, 0) +
                                      kpts[p][1] * u.coord_mm(y, 1) +
                                      kpts[p][2] * u.coord_mm(z, 2);
                    acc += u.at(x, y, z) * std::polar(1.0, -ph);
                }
            }
        }
        out[p] = acc;
    }
    return out;
}

// Direct adjoint: v(x) = sum_k s_k exp(+i k.x).
inline ComplexVolume3D direct_type2_adjoint(const std::vector<cdouble>& samples,
                                            const std::vector<Vec3>& kpts, Shape3 dims,
                                            Vec3 voxel) {
    ComplexVolume3D out(dims, voxel);
    for (int z = 0; z < dims[2]; ++z) {
        for (int y = 0; y < dims[1]; ++y) {
            for (int x = 0; x < dims[0]; ++x) {
                cdouble acc = 0.0;
                for (std::size_t p = 0; p < kpts.size(); ++p) {
                    const double ph = kpts[p][0] * out.coord_mm(x, 0) +
                                      kpts[p][1] * out.coord_mm(y, 1) +
                                      kpts[p][2] * out.coord_mm(z, 2);
                    acc += samples[p] * std::polar(1.0, ph);
                }
                out.at(x, y, z) = acc;
            }
        }
    }
    return out;
}

inline double rel_l2(const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return std::sqrt(num / den);
}

inline double rel_l2(const ComplexVolume3D& a, const ComplexVolume3D& b) {
    return rel_l2(a.data, b.data);
}

}  // namespace oracle
