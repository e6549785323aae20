#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgmc/geometry.hpp"
#include "rgmc/volume.hpp"

namespace rgmc {

// Per-voxel complex 3-vector field (discrete gradients and dual variables).
struct GradientField {
    Shape3 dims{0, 0, 0};
    std::vector<std::array<cdouble, 3>> v;

    GradientField() = default;
    explicit GradientField(Shape3 d)
        : dims(d), v(static_cast<std::size_t>(d[0]) * d[1] * d[2]) {}
    std::size_t size() const { return v.size(); }
};

// Smoothly normalized reference gradient; the per-voxel projection is
// Pi = I - xi xi^H with ||xi|| < 1 strictly (eta > 0).
struct GuideField {
    Shape3 dims{0, 0, 0};
    double eta = 0.0;
    std::vector<std::array<cdouble, 3>> xi;  // empty means xi == 0 (plain TV)

    bool is_zero() const { return xi.empty(); }
};

enum class RegMode { guided, plain_tv };

struct RegConfig {
    double epsilon = 0.0;     // TV-ball radius (0 means data-derived default)
    double eta = 0.0;         // guide smoothing (0 means relative default)
    int inner_iters = 200;    // projection solver cap
    double inner_tol = 1e-4;  // relative duality-gap tolerance
    double mu = 0.0;          // motion smoothness weight (0 disables the prox)
    RegMode mode = RegMode::guided;

    void validate() const;
};

// Forward-difference gradient, zero beyond the far face (the kernel of the
// resulting TV is exactly the constant volumes).
GradientField gradient_forward(const ComplexVolume3D& u);

// Exact adjoint of gradient_forward (a negative divergence).
ComplexVolume3D gradient_adjoint(const GradientField& g);

// xi = grad(v) / sqrt(||grad v||^2 + eta^2).
GuideField build_guide(const ComplexVolume3D& v, double eta);

// Relative default smoothing: 0.05 x the maximum gradient magnitude of v.
double default_eta(const ComplexVolume3D& v);

GuideField zero_guide(Shape3 dims);

// (I - xi xi^H) applied per voxel; Hermitian, so it is its own adjoint.
GradientField apply_guide_projection(const GuideField& guide, const GradientField& g);

GradientField projected_gradient(const ComplexVolume3D& u, const GuideField& guide);

// sum_x || Pi grad u ||  (Euclidean norm over the six real components).
double sgtv_value(const ComplexVolume3D& u, const GuideField& guide);

// Plain isotropic TV, equal to sgtv_value with a zero guide.
double tv_value(const ComplexVolume3D& u);

struct ProjectionResult {
    ComplexVolume3D u;
    double gap = 0.0;        // final relative duality gap
    int iterations = 0;
    bool early_return = false;  // input was already feasible
    GradientField dual;      // final dual variable, reusable as a warm start
};

// Euclidean projection onto {w : sgtv_value(w, guide) <= epsilon}, solved by
// accelerated projected gradient on the dual with per-voxel 3-vector duals.
// The result is always feasible (<= epsilon up to roundoff); if the input is
// feasible it is returned unchanged.
ProjectionResult project_sgtv_ball(const ComplexVolume3D& u, const GuideField& guide,
                                   double epsilon, int inner_iters, double inner_tol,
                                   const GradientField* warm_start = nullptr);

// Exact minimizer of 0.5*||theta - z||^2 + alpha*mu*0.5*sum_t||th_{t+1}-th_t||^2,
// i.e. the tridiagonal solve (I + alpha*mu*D^T D) theta = z per channel.
MotionTrace prox_motion_smoothness(const MotionTrace& z, double alpha, double mu);

// Same prox with one step length per parameter channel.
MotionTrace prox_motion_smoothness(const MotionTrace& z, const std::array<double, 6>& alpha,
                                   double mu);

// Piecewise-linear interpolation of each channel from m uniformly spaced
// knots to n_t time indices; identity when m == n_t.
MotionTrace coarse_time_parameterize(const MotionTrace& knots, std::size_t n_t);

// Least-squares projection of a trace onto the span of m uniform linear
// knots (the hard-constraint alternative to the smoothness prox).
MotionTrace knot_subspace_project(const MotionTrace& trace, std::size_t m);

}  // namespace rgmc
