#include "rgmc/volume.hpp"

#include <string>

namespace rgmc {

void require_valid_grid(const ComplexVolume3D& v, const char* what) {
    for (int a = 0; a < 3; ++a) {
        if (v.dims[a] < 2) {
            throw InvalidInputError(std::string(what) + ": dims must be >= 2 per axis");
        }
        if (!(v.voxel_mm[a] > 0.0)) {
            throw InvalidInputError(std::string(what) + ": voxel size must be positive");
        }
    }
    const std::size_t expect = static_cast<std::size_t>(v.dims[0]) * v.dims[1] * v.dims[2];
    if (v.data.size() != expect) {
        throw InvalidInputError(std::string(what) + ": data length does not match dims");
    }
}

void require_finite(const ComplexVolume3D& v, const char* what) {
    for (const cdouble& c : v.data) {
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
            throw InvalidInputError(std::string(what) + ": non-finite entry");
        }
    }
}

double norm2(const ComplexVolume3D& v) {
    double s = 0.0;
    for (const cdouble& c : v.data) s += std::norm(c);
    return std::sqrt(s);
}

cdouble dot(const ComplexVolume3D& a, const ComplexVolume3D& b) {
    if (a.data.size() != b.data.size()) {
        throw InvalidInputError("dot: size mismatch");
    }
    cdouble s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::conj(a.data[i]) * b.data[i];
    return s;
}

ComplexVolume3D operator+(const ComplexVolume3D& a, const ComplexVolume3D& b) {
    ComplexVolume3D r = a;
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
    return r;
}

ComplexVolume3D operator-(const ComplexVolume3D& a, const ComplexVolume3D& b) {
    ComplexVolume3D r = a;
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] -= b.data[i];
    return r;
}

ComplexVolume3D operator*(cdouble s, const ComplexVolume3D& a) {
    ComplexVolume3D r = a;
    for (cdouble& c : r.data) c *= s;
    return r;
}

}  // namespace rgmc
