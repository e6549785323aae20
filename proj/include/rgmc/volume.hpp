#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "rgmc/errors.hpp"

namespace rgmc {

using cdouble = std::complex<double>;
using Shape3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

// Complex 3D image or k-space array on a regular grid. Storage is x-fastest
// (index = x + nx*(y + ny*z)); the spatial origin is the FOV center, i.e.
// voxel (nx/2, ny/2, nz/2) sits at physical coordinate (0,0,0) mm.
struct ComplexVolume3D {
    Shape3 dims{0, 0, 0};
    Vec3 voxel_mm{1.0, 1.0, 1.0};
    std::vector<cdouble> data;

    ComplexVolume3D() = default;
    ComplexVolume3D(Shape3 d, Vec3 voxel = {1.0, 1.0, 1.0})
        : dims(d), voxel_mm(voxel), data(static_cast<std::size_t>(d[0]) * d[1] * d[2]) {}

    std::size_t size() const { return data.size(); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z);
    }

    cdouble& at(int x, int y, int z) { return data[index(x, y, z)]; }
    const cdouble& at(int x, int y, int z) const { return data[index(x, y, z)]; }

    // Physical coordinate (mm) of voxel center i along axis a, FOV-centered.
    double coord_mm(int i, int a) const { return (i - dims[a] / 2) * voxel_mm[a]; }
};

inline bool same_grid(const ComplexVolume3D& a, const ComplexVolume3D& b) {
    return a.dims == b.dims;
}

void require_valid_grid(const ComplexVolume3D& v, const char* what);
void require_finite(const ComplexVolume3D& v, const char* what);

double norm2(const ComplexVolume3D& v);
// Standard complex inner product, conjugate-linear in the first argument.
cdouble dot(const ComplexVolume3D& a, const ComplexVolume3D& b);

ComplexVolume3D operator+(const ComplexVolume3D& a, const ComplexVolume3D& b);
ComplexVolume3D operator-(const ComplexVolume3D& a, const ComplexVolume3D& b);
ComplexVolume3D operator*(cdouble s, const ComplexVolume3D& a);

}  // namespace rgmc
