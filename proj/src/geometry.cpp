#include "rgmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rgmc {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite3(const Vec3& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidParameterError(std::string(what) + ": non-finite value");
    }
}

// Rotation by an angle in the plane spanned by axes (i, j), rotating +i toward
// +j; pass (c, s) = (cos, sin) for the matrix itself or (-sin, cos) for its
// angle derivative (which also zeroes the fixed axis).
Mat3 plane_rotation(int i, int j, double c, double s, bool derivative) {
    Mat3 r{};
    if (!derivative) r.m[3 - i - j][3 - i - j] = 1.0;
    r.m[i][i] = c;
    r.m[i][j] = -s;
    r.m[j][i] = s;
    r.m[j][j] = c;
    return r;
}

Mat3 rot_xy(double a) { return plane_rotation(0, 1, std::cos(a), std::sin(a), false); }
Mat3 rot_xz(double a) { return plane_rotation(0, 2, std::cos(a), std::sin(a), false); }
Mat3 rot_yz(double a) { return plane_rotation(1, 2, std::cos(a), std::sin(a), false); }

Mat3 drot_xy(double a) { return plane_rotation(0, 1, -std::sin(a), std::cos(a), true); }
Mat3 drot_xz(double a) { return plane_rotation(0, 2, -std::sin(a), std::cos(a), true); }
Mat3 drot_yz(double a) { return plane_rotation(1, 2, -std::sin(a), std::cos(a), true); }

}  // namespace

double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

RigidParams::RigidParams(const Vec3& tau, const Vec3& phi) : tau_mm(tau) {
    require_finite3(tau, "RigidParams.tau");
    require_finite3(phi, "RigidParams.phi");
    for (int i = 0; i < 3; ++i) phi_rad[i] = wrap_angle(phi[i]);
}

bool RigidParams::is_zero() const {
    for (int i = 0; i < 3; ++i) {
        if (tau_mm[i] != 0.0 || phi_rad[i] != 0.0) return false;
    }
    return true;
}

Mat3 Mat3::identity() {
    Mat3 r{};
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
}

Mat3 Mat3::transposed() const {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
}

Vec3 Mat3::apply(const Vec3& v) const {
    Vec3 r{};
    for (int i = 0; i < 3; ++i) {
        r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    return r;
}

double Mat3::det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r.m[i][j] += a.m[i][k] * b.m[k][j];
    return r;
}

Mat3 rotation_matrix(const Vec3& phi_rad) {
    require_finite3(phi_rad, "rotation_matrix.phi");
    return rot_yz(phi_rad[2]) * rot_xz(phi_rad[1]) * rot_xy(phi_rad[0]);
}

std::array<Mat3, 3> rotation_matrix_derivatives(const Vec3& phi_rad) {
    require_finite3(phi_rad, "rotation_matrix_derivatives.phi");
    const Mat3 rxy = rot_xy(phi_rad[0]);
    const Mat3 rxz = rot_xz(phi_rad[1]);
    const Mat3 ryz = rot_yz(phi_rad[2]);
    return {ryz * rxz * drot_xy(phi_rad[0]), ryz * drot_xz(phi_rad[1]) * rxy,
            drot_yz(phi_rad[2]) * rxz * rxy};
}

Vec3 angles_from_rotation_matrix(const Mat3& r) {
    // R[0][2] = -sin(phi_xz); see rotation_matrix composition.
    const double sb = -r.m[0][2];
    const double cb = std::sqrt(std::max(0.0, 1.0 - sb * sb));
    Vec3 phi{};
    phi[1] = std::asin(std::clamp(sb, -1.0, 1.0));
    if (cb < 1e-12) {
        // Gimbal configuration: only phi_xy +/- phi_yz is determined; pin phi_xy = 0.
        phi[0] = 0.0;
        phi[2] = std::atan2(r.m[2][1], r.m[1][1]);
        return phi;
    }
    phi[0] = std::atan2(-r.m[0][1], r.m[0][0]);
    phi[2] = std::atan2(-r.m[1][2], r.m[2][2]);
    return phi;
}

std::vector<Vec3> apply_rigid(const RigidParams& params, std::span<const Vec3> points_mm) {
    for (const Vec3& p : points_mm) require_finite3(p, "apply_rigid.point");
    const Mat3 r = rotation_matrix(params.phi_rad);
    std::vector<Vec3> out;
    out.reserve(points_mm.size());
    for (const Vec3& p : points_mm) {
        Vec3 q = r.apply(p);
        for (int i = 0; i < 3; ++i) q[i] += params.tau_mm[i];
        out.push_back(q);
    }
    return out;
}

std::vector<Vec3> apply_rigid_inverse(const RigidParams& params, std::span<const Vec3> points_mm) {
    for (const Vec3& p : points_mm) require_finite3(p, "apply_rigid_inverse.point");
    const Mat3 rt = rotation_matrix(params.phi_rad).transposed();
    std::vector<Vec3> out;
    out.reserve(points_mm.size());
    for (const Vec3& p : points_mm) {
        Vec3 q{p[0] - params.tau_mm[0], p[1] - params.tau_mm[1], p[2] - params.tau_mm[2]};
        out.push_back(rt.apply(q));
    }
    return out;
}

std::vector<Vec3> inverse_rotate_kpoints(const Vec3& phi_rad, std::span<const Vec3> kpoints) {
    const Mat3 rt = rotation_matrix(phi_rad).transposed();
    std::vector<Vec3> out;
    out.reserve(kpoints.size());
    for (const Vec3& k : kpoints) {
        require_finite3(k, "inverse_rotate_kpoints.k");
        out.push_back(rt.apply(k));
    }
    return out;
}

RigidParams compose(const RigidParams& a, const RigidParams& b) {
    const Mat3 ra = rotation_matrix(a.phi_rad);
    const Mat3 rb = rotation_matrix(b.phi_rad);
    const Vec3 rtb = ra.apply(b.tau_mm);
    Vec3 tau{rtb[0] + a.tau_mm[0], rtb[1] + a.tau_mm[1], rtb[2] + a.tau_mm[2]};
    return RigidParams(tau, angles_from_rotation_matrix(ra * rb));
}

RigidParams inverse(const RigidParams& a) {
    const Mat3 rt = rotation_matrix(a.phi_rad).transposed();
    const Vec3 t = rt.apply(a.tau_mm);
    return RigidParams({-t[0], -t[1], -t[2]}, angles_from_rotation_matrix(rt));
}

}  // namespace rgmc
