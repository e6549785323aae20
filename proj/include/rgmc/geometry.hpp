#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "rgmc/volume.hpp"

namespace rgmc {

// Axis semantics shared by simulation and reconstruction. x = left-right,
// y = posterior-anterior, z = inferior-superior; the xy plane is axial,
// xz coronal, yz sagittal. A positive plane angle rotates the first named
// axis toward the second (right-hand rule on the ordered axis pair).
struct AxisConvention {
    static constexpr const char* id = "x:LR y:PA z:IS, planes xy/xz/yz, right-handed";
    static constexpr int axial[2] = {0, 1};
    static constexpr int coronal[2] = {0, 2};
    static constexpr int sagittal[2] = {1, 2};
};

// Wraps an angle into the canonical range (-pi, pi].
double wrap_angle(double a);

// Six rigid-motion parameters: translations in mm, then the three plane
// rotation angles in radians, ordered (phi_xy, phi_xz, phi_yz). Angles are
// wrapped into (-pi, pi] on construction.
struct RigidParams {
    Vec3 tau_mm{0.0, 0.0, 0.0};
    Vec3 phi_rad{0.0, 0.0, 0.0};

    RigidParams() = default;
    RigidParams(const Vec3& tau, const Vec3& phi);

    bool is_zero() const;
    std::array<double, 6> flat() const {
        return {tau_mm[0], tau_mm[1], tau_mm[2], phi_rad[0], phi_rad[1], phi_rad[2]};
    }
};

// One rigid pose per readout time index.
using MotionTrace = std::vector<RigidParams>;

// Minimal fixed-size 3x3 real matrix; row-major, acts on column vectors.
struct Mat3 {
    std::array<std::array<double, 3>, 3> m{};

    static Mat3 identity();
    Mat3 transposed() const;
    Vec3 apply(const Vec3& v) const;
    double det() const;

    friend Mat3 operator*(const Mat3& a, const Mat3& b);
};

// Rotation matrix for plane angles (phi_xy, phi_xz, phi_yz). Composition is
// R_yz * R_xz * R_xy on column points, so the xy-plane rotation acts first.
Mat3 rotation_matrix(const Vec3& phi_rad);

// Partial derivatives of rotation_matrix with respect to each plane angle.
std::array<Mat3, 3> rotation_matrix_derivatives(const Vec3& phi_rad);

// Recovers (phi_xy, phi_xz, phi_yz) from a rotation matrix produced by
// rotation_matrix. Valid away from the gimbal singularity |cos(phi_xz)| = 0.
Vec3 angles_from_rotation_matrix(const Mat3& r);

// p -> R*p + tau for each point (mm, FOV-centered coordinates).
std::vector<Vec3> apply_rigid(const RigidParams& params, std::span<const Vec3> points_mm);

// Exact inverse of apply_rigid: p -> R^T*(p - tau).
std::vector<Vec3> apply_rigid_inverse(const RigidParams& params, std::span<const Vec3> points_mm);

// k -> R^T*k for each k-space point (transpose equals inverse by orthogonality).
std::vector<Vec3> inverse_rotate_kpoints(const Vec3& phi_rad, std::span<const Vec3> kpoints);

// Composition T_a(T_b(p)) and exact inverse as RigidParams.
RigidParams compose(const RigidParams& a, const RigidParams& b);
RigidParams inverse(const RigidParams& a);

}  // namespace rgmc
