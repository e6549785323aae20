#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rgmc/forward_model.hpp"
#include "rgmc/regularization.hpp"

namespace rgmc {

struct SolverConfig {
    std::vector<int> scales{4, 2, 1};          // grid divisors, coarse to fine
    std::vector<double> lambda_schedule{4, 2, 1};  // strength multipliers, high to low;
                                                   // stage ball radius = epsilon_base / strength
    int iters_per_stage = 30;
    double alpha_u = 0.0;       // 0 = power-iteration estimate with safety factor 0.9
    double alpha_theta = 0.0;   // 0 = curvature-based per-channel estimate
    std::vector<int> knots_per_scale;  // empty = smoothness prox only (no hard knot constraint)
    RegMode mode = RegMode::guided;
    double epsilon_base = 0.0;  // 0 = 0.8 x sgtv of the zero-filled reconstruction per scale
    double eta = 0.0;           // 0 = 0.05 x max reference gradient per scale
    double mu = -1.0;           // < 0 = curvature-scaled default, 0 = prox disabled
    int inner_iters = 200;
    double inner_tol = 1e-4;
    bool early_exit_on_stagnation = false;
    double stagnation_rtol = 1e-7;
    NufftConfig nufft;

    void validate() const;
};

struct StageRecord {
    int scale = 1;
    int continuation_index = 0;
    double epsilon = 0.0;
    double mu = 0.0;
    double alpha_u = 0.0;
    std::vector<double> misfit_history;
    std::vector<double> feasibility_gap;
    int backtracks_u = 0;
    int backtracks_theta = 0;
    double seconds = 0.0;
};

struct CorrectionReport {
    std::vector<StageRecord> stages;
    double final_misfit = 0.0;
    std::size_t out_of_band_zeroed = 0;
    bool diverged = false;
    std::string divergence_message;
};

// Mutable optimization state for one (scale, continuation) stage.
struct SolverState {
    ComplexVolume3D u;
    MotionTrace trace;
    int scale_index = 0;
    int continuation_index = 0;
    int iteration = 0;
    std::vector<double> misfit_history;
    double current_misfit = -1.0;  // negative = not yet evaluated
    double epsilon = 0.0;
    double mu = 0.0;
    std::size_t knots = 0;  // 0 disables the hard knot constraint
    double alpha_u = 0.0;
    std::array<double, 6> alpha_theta{};
    GradientField dual;  // warm start for the ball projection
    int backtracks_u = 0;
    int backtracks_theta = 0;
    double last_feasibility_gap = 0.0;
};

// One alternating step: an image gradient step followed by the ball
// projection, then a motion gradient step followed by the smoothness prox.
// Backtracking keeps the misfit non-increasing up to 1e-6 relative.
SolverState palm_iteration(SolverState state, const KSpaceData& data,
                           const SamplingPattern& pattern, const GuideField& guide,
                           const SolverConfig& cfg);

struct DownscaledProblem {
    KSpaceData data;
    SamplingPattern pattern;
    MotionTrace trace;
    std::vector<std::size_t> kept_lines;  // original acquisition indices, order preserved
};

// Central k-space crop: keeps readout lines whose phase-encoding coordinates
// fall in the coarse band and crops each line to the central readout window.
// Retained samples are an exact subset of the input.
DownscaledProblem downscale_problem(const KSpaceData& data, const SamplingPattern& pattern,
                                    const MotionTrace& trace, int factor);

// Fourier zero-padding of the image plus nearest-preceding-pose extension of
// the trace onto the lines absent at the coarse scale.
std::pair<ComplexVolume3D, MotionTrace> upscale_solution(const ComplexVolume3D& u,
                                                         const MotionTrace& trace,
                                                         const Shape3& fine_dims,
                                                         const SamplingPattern& fine_pattern);

// Largest eigenvalue estimate of F^H F at theta = 0 (deterministic start).
double power_iteration_lipschitz(const SamplingPattern& pattern, const NufftConfig& cfg,
                                 int iterations = 10);

struct CorrectionResult {
    ComplexVolume3D u;
    MotionTrace trace;
    CorrectionReport report;
};

// Joint reconstruction and motion estimation with nested grid and
// regularization continuation. The reference is resampled to the data grid
// before guide construction; it does not need to be registered.
CorrectionResult run_correction(const KSpaceData& data, const SamplingPattern& pattern,
                                const ComplexVolume3D& reference, const SolverConfig& cfg);

}  // namespace rgmc
