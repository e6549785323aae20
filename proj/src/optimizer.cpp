#include "rgmc/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "rgmc/fft.hpp"
#include "rgmc/simulation.hpp"

namespace rgmc {

namespace {

constexpr double kBacktrackRtol = 1e-6;
constexpr int kMaxHalvings = 30;

double require_finite_scalar(double v, int scale_index, int stage_index, const char* what) {
    if (!std::isfinite(v)) {
        throw DivergenceError(std::string(what) + ": non-finite objective", scale_index,
                              stage_index);
    }
    return v;
}

// Acceptance test for the monotone-misfit contract.
bool misfit_acceptable(double f_new, double f_old) {
    return f_new <= f_old * (1.0 + kBacktrackRtol) + 1e-300;
}

MotionTrace theta_step(const MotionTrace& trace, const std::vector<std::array<double, 6>>& grad,
                       const std::array<double, 6>& alpha, double scale) {
    MotionTrace out(trace.size());
    for (std::size_t t = 0; t < trace.size(); ++t) {
        Vec3 tau{}, phi{};
        for (int a = 0; a < 3; ++a) {
            tau[a] = trace[t].tau_mm[a] - scale * alpha[a] * grad[t][a];
            phi[a] = trace[t].phi_rad[a] - scale * alpha[3 + a] * grad[t][3 + a];
        }
        out[t] = RigidParams(tau, phi);
    }
    return out;
}

}  // namespace

void SolverConfig::validate() const {
    if (scales.empty()) throw InvalidParameterError("SolverConfig: scales must be non-empty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] < 1) throw InvalidParameterError("SolverConfig: scale divisors must be >= 1");
        if (i > 0 && scales[i] >= scales[i - 1]) {
            throw InvalidParameterError("SolverConfig: scales must be strictly decreasing");
        }
    }
    if (scales.back() != 1) {
        throw InvalidParameterError("SolverConfig: the final scale divisor must be 1");
    }
    if (lambda_schedule.empty()) {
        throw InvalidParameterError("SolverConfig: lambda_schedule must be non-empty");
    }
    for (double s : lambda_schedule) {
        if (!(s > 0.0)) throw InvalidParameterError("SolverConfig: strengths must be positive");
    }
    if (iters_per_stage < 1) {
        throw InvalidParameterError("SolverConfig: iters_per_stage must be >= 1");
    }
    if (alpha_u < 0.0 || alpha_theta < 0.0) {
        throw InvalidParameterError("SolverConfig: step sizes must be >= 0");
    }
    if (!knots_per_scale.empty() && knots_per_scale.size() != scales.size()) {
        throw InvalidParameterError("SolverConfig: knots_per_scale must match scales");
    }
    if (inner_iters < 1) throw InvalidParameterError("SolverConfig: inner_iters must be >= 1");
    if (!(inner_tol > 0.0)) throw InvalidParameterError("SolverConfig: inner_tol must be > 0");
    nufft.validate();
}

SolverState palm_iteration(SolverState state, const KSpaceData& data,
                           const SamplingPattern& pattern, const GuideField& guide,
                           const SolverConfig& cfg) {
    if (state.trace.size() != pattern.n_lines()) {
        throw InvalidInputError("palm_iteration: trace length does not match pattern");
    }
    if (state.u.dims != pattern.dims) {
        throw InvalidInputError("palm_iteration: state dims do not match pattern");
    }

    if (state.current_misfit < 0.0) {
        state.current_misfit = misfit(state.u, state.trace, data, cfg.nufft);
    }
    const double f0 = require_finite_scalar(state.current_misfit, state.scale_index,
                                            state.continuation_index, "palm_iteration");

    // ---- image update: gradient step, then projection onto the ball ----
    const ComplexVolume3D g = grad_u(state.u, state.trace, data, cfg.nufft);
    double f_u = f0;
    {
        double alpha = state.alpha_u;
        ComplexVolume3D candidate(state.u.dims, state.u.voxel_mm);
        for (int h = 0; h <= kMaxHalvings; ++h) {
            for (std::size_t i = 0; i < candidate.data.size(); ++i) {
                candidate.data[i] = state.u.data[i] - alpha * g.data[i];
            }
            ProjectionResult proj =
                project_sgtv_ball(candidate, guide, state.epsilon, cfg.inner_iters, cfg.inner_tol,
                                  state.dual.size() ? &state.dual : nullptr);
            const double f_new = misfit(proj.u, state.trace, data, cfg.nufft);
            if (misfit_acceptable(f_new, f0) || h == kMaxHalvings) {
                if (h == kMaxHalvings && !misfit_acceptable(f_new, f0)) {
                    break;  // keep the previous iterate; the step is hopeless
                }
                state.u = std::move(proj.u);
                state.dual = std::move(proj.dual);
                state.last_feasibility_gap = proj.gap;
                state.alpha_u = alpha;
                f_u = f_new;
                break;
            }
            alpha *= 0.5;
            ++state.backtracks_u;
        }
    }
    require_finite_scalar(f_u, state.scale_index, state.continuation_index, "palm_iteration.u");

    // ---- motion update: gradient step, then smoothness prox ----
    const ThetaDerivatives th = grad_theta(state.u, state.trace, data, cfg.nufft);
    double f_theta = th.misfit_value;  // misfit at (u_new, trace)
    {
        double scale = 1.0;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            MotionTrace candidate = theta_step(state.trace, th.grad, state.alpha_theta, scale);
            if (state.mu > 0.0) {
                std::array<double, 6> eff{};
                for (int c = 0; c < 6; ++c) eff[c] = scale * state.alpha_theta[c];
                candidate = prox_motion_smoothness(candidate, eff, state.mu);
            }
            if (state.knots > 0 && state.knots < candidate.size()) {
                candidate = knot_subspace_project(candidate, state.knots);
            }
            const double f_new = misfit(state.u, candidate, data, cfg.nufft);
            if (misfit_acceptable(f_new, f_theta)) {
                state.trace = std::move(candidate);
                f_theta = f_new;
                break;
            }
            if (h == kMaxHalvings) break;  // keep the previous trace
            scale *= 0.5;
            ++state.backtracks_theta;
        }
    }
    require_finite_scalar(f_theta, state.scale_index, state.continuation_index,
                          "palm_iteration.theta");

    state.current_misfit = f_theta;
    state.misfit_history.push_back(f_theta);
    ++state.iteration;
    return state;
}

DownscaledProblem downscale_problem(const KSpaceData& data, const SamplingPattern& pattern,
                                    const MotionTrace& trace, int factor) {
    if (factor < 1) throw InvalidParameterError("downscale_problem: factor must be >= 1");
    data.validate();
    if (trace.size() != pattern.n_lines()) {
        throw InvalidInputError("downscale_problem: trace length mismatch");
    }
    for (int a = 0; a < 3; ++a) {
        if (pattern.dims[a] % factor != 0 || pattern.dims[a] / factor < 2) {
            throw InvalidParameterError("downscale_problem: factor does not divide dims");
        }
    }

    DownscaledProblem out;
    out.pattern = pattern;
    for (int a = 0; a < 3; ++a) {
        out.pattern.dims[a] = pattern.dims[a] / factor;
        out.pattern.voxel_mm[a] = pattern.voxel_mm[a] * factor;  // FOV preserved
    }
    out.pattern.pe_coords.clear();

    const std::array<int, 2> pe = pattern.pe_axes();
    const int b1 = out.pattern.dims[pe[0]], b2 = out.pattern.dims[pe[1]];
    const int n_r = pattern.n_readout();
    const int n_r_coarse = out.pattern.dims[pattern.readout_axis];
    const int r_off = n_r / 2 - n_r_coarse / 2;

    for (std::size_t t = 0; t < pattern.n_lines(); ++t) {
        const std::array<int, 2>& c = pattern.pe_coords[t];
        if (c[0] < -b1 / 2 || c[0] >= (b1 + 1) / 2) continue;
        if (c[1] < -b2 / 2 || c[1] >= (b2 + 1) / 2) continue;
        out.pattern.pe_coords.push_back(c);
        out.kept_lines.push_back(t);
        out.trace.push_back(trace[t]);
        for (int r = 0; r < n_r_coarse; ++r) {
            out.data.samples.push_back(data.at(t, static_cast<std::size_t>(r + r_off)));
        }
    }
    out.data.pattern = out.pattern;
    out.data.noise_sigma = data.noise_sigma;
    return out;
}

std::pair<ComplexVolume3D, MotionTrace> upscale_solution(const ComplexVolume3D& u,
                                                         const MotionTrace& trace,
                                                         const Shape3& fine_dims,
                                                         const SamplingPattern& fine_pattern) {
    int factor = 0;
    for (int a = 0; a < 3; ++a) {
        if (fine_dims[a] % u.dims[a] != 0) {
            throw InvalidParameterError("upscale_solution: coarse dims must divide fine dims");
        }
        const int f = fine_dims[a] / u.dims[a];
        if (factor == 0) factor = f;
        if (f != factor) {
            throw InvalidParameterError("upscale_solution: anisotropic scale factors");
        }
    }
    if (fine_pattern.dims != fine_dims) {
        throw InvalidInputError("upscale_solution: pattern does not match fine dims");
    }

    // Spectral zero-padding preserves shared low frequencies exactly.
    ComplexVolume3D fine_u = ifft3_centered(spectrum_crop_pad(fft3_centered(u), fine_dims));
    for (int a = 0; a < 3; ++a) fine_u.voxel_mm[a] = u.voxel_mm[a] * u.dims[a] / fine_dims[a];

    // Coarse-scale lines are the fine lines whose phase-encoding coordinates
    // lie in the coarse band; other lines take the nearest preceding pose.
    const std::array<int, 2> pe = fine_pattern.pe_axes();
    const int b1 = fine_dims[pe[0]] / factor, b2 = fine_dims[pe[1]] / factor;
    MotionTrace fine_trace(fine_pattern.n_lines());
    std::size_t coarse_t = 0;
    RigidParams current{};
    bool seen_any = false;
    // First pass to find the first kept pose for the leading unseen lines.
    for (std::size_t t = 0; t < fine_pattern.n_lines() && !seen_any; ++t) {
        const std::array<int, 2>& c = fine_pattern.pe_coords[t];
        if (c[0] >= -b1 / 2 && c[0] < (b1 + 1) / 2 && c[1] >= -b2 / 2 && c[1] < (b2 + 1) / 2) {
            if (trace.empty()) break;
            current = trace[0];
            seen_any = true;
        }
    }
    for (std::size_t t = 0; t < fine_pattern.n_lines(); ++t) {
        const std::array<int, 2>& c = fine_pattern.pe_coords[t];
        const bool kept = c[0] >= -b1 / 2 && c[0] < (b1 + 1) / 2 && c[1] >= -b2 / 2 &&
                          c[1] < (b2 + 1) / 2;
        if (kept) {
            if (coarse_t >= trace.size()) {
                throw InvalidInputError("upscale_solution: trace shorter than kept line count");
            }
            current = trace[coarse_t++];
        }
        fine_trace[t] = current;
    }
    if (coarse_t != trace.size()) {
        throw InvalidInputError("upscale_solution: trace length does not match kept lines");
    }
    return {std::move(fine_u), std::move(fine_trace)};
}

double power_iteration_lipschitz(const SamplingPattern& pattern, const NufftConfig& cfg,
                                 int iterations) {
    ComplexVolume3D v(pattern.dims, pattern.voxel_mm);
    Rng rng(0x5eedULL);
    for (cdouble& c : v.data) c = cdouble(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    double nrm = norm2(v);
    for (cdouble& c : v.data) c /= nrm;

    const MotionTrace zero(pattern.n_lines());
    double lambda = 1.0;
    for (int it = 0; it < iterations; ++it) {
        const KSpaceData fv = perturbed_fourier(v, zero, pattern, cfg);
        ComplexVolume3D av = perturbed_fourier_adjoint(fv, zero, pattern, cfg);
        lambda = dot(v, av).real();
        nrm = norm2(av);
        if (nrm <= 0.0) return 1e-12;
        for (cdouble& c : av.data) c /= nrm;
        v = std::move(av);
    }
    return std::max(lambda, 1e-12);
}

namespace {

struct StageSetup {
    GuideField guide;
    double epsilon_base = 0.0;
    double alpha_u = 0.0;
    std::array<double, 6> alpha_theta{};
    double mu = 0.0;
};

StageSetup prepare_scale(const KSpaceData& data, const SamplingPattern& pattern,
                         const ComplexVolume3D& reference_full, const SolverConfig& cfg,
                         const ComplexVolume3D& u, const MotionTrace& trace) {
    StageSetup s;

    if (cfg.mode == RegMode::guided) {
        ComplexVolume3D ref = spectral_resize(reference_full, pattern.dims);
        ref.voxel_mm = pattern.voxel_mm;
        const double eta = (cfg.eta > 0.0) ? cfg.eta : default_eta(ref);
        s.guide = build_guide(ref, eta);
    } else {
        s.guide = zero_guide(pattern.dims);
    }

    if (cfg.epsilon_base > 0.0) {
        s.epsilon_base = cfg.epsilon_base;
    } else {
        const ComplexVolume3D zf =
            perturbed_fourier_adjoint(data, MotionTrace(pattern.n_lines()), pattern, cfg.nufft);
        s.epsilon_base = 0.8 * sgtv_value(zf, s.guide);
    }

    if (cfg.alpha_u > 0.0) {
        s.alpha_u = cfg.alpha_u;
    } else {
        const double lip = power_iteration_lipschitz(pattern, cfg.nufft);
        s.alpha_u = 0.9 / lip;
    }

    // Per-channel curvature of the misfit at the stage start; conservative
    // (max over readouts) to keep plain gradient steps stable.
    const ThetaDerivatives th = grad_theta(u, trace, data, cfg.nufft);
    std::array<double, 6> hmax{};
    double hsum = 0.0;
    std::size_t hcount = 0;
    for (const auto& h : th.curvature) {
        for (int c = 0; c < 6; ++c) {
            hmax[c] = std::max(hmax[c], h[c]);
            hsum += h[c];
            ++hcount;
        }
    }
    const double hmean = (hcount > 0) ? hsum / static_cast<double>(hcount) : 1.0;
    if (cfg.alpha_theta > 0.0) {
        s.alpha_theta.fill(cfg.alpha_theta);
    } else {
        for (int c = 0; c < 6; ++c) {
            s.alpha_theta[c] = 0.9 / std::max(hmax[c], 1e-9 * hmean + 1e-300);
        }
    }
    s.mu = (cfg.mu >= 0.0) ? cfg.mu : 0.1 * hmean;
    return s;
}

}  // namespace

CorrectionResult run_correction(const KSpaceData& data, const SamplingPattern& pattern,
                                const ComplexVolume3D& reference, const SolverConfig& cfg) {
    cfg.validate();
    data.validate();
    pattern.validate();
    if (data.pattern.pe_coords != pattern.pe_coords) {
        throw InvalidInputError("run_correction: data and pattern disagree");
    }
    if (cfg.mode == RegMode::guided) {
        require_valid_grid(reference, "run_correction.reference");
        for (int a = 0; a < 3; ++a) {
            if (reference.dims[a] % 2 != pattern.dims[a] % 2) {
                // Spectral resampling between odd/even grids shifts the FOV
                // center half a voxel; reject rather than silently blur.
                throw InvalidInputError("run_correction: reference parity incompatible with grid");
            }
        }
    }

    CorrectionResult result;
    CorrectionReport& report = result.report;

    ComplexVolume3D u;
    MotionTrace trace;
    bool have_state = false;

    try {
        for (std::size_t si = 0; si < cfg.scales.size(); ++si) {
            const int factor = cfg.scales[si];
            DownscaledProblem prob = downscale_problem(data, pattern, MotionTrace(data.n_t()),
                                                       factor);
            report.out_of_band_zeroed = data.out_of_band_zeroed;

            if (!have_state) {
                u = ComplexVolume3D(prob.pattern.dims, prob.pattern.voxel_mm);
                trace = MotionTrace(prob.pattern.n_lines());
                have_state = true;
            } else {
                auto up = upscale_solution(u, trace, prob.pattern.dims, prob.pattern);
                u = std::move(up.first);
                u.voxel_mm = prob.pattern.voxel_mm;
                trace = std::move(up.second);
            }

            const StageSetup setup =
                prepare_scale(prob.data, prob.pattern, reference, cfg, u, trace);

            SolverState state;
            state.u = std::move(u);
            state.trace = std::move(trace);
            state.scale_index = static_cast<int>(si);
            state.alpha_u = setup.alpha_u;
            state.alpha_theta = setup.alpha_theta;
            state.mu = setup.mu;
            state.knots = cfg.knots_per_scale.empty()
                              ? 0
                              : static_cast<std::size_t>(std::max(0, cfg.knots_per_scale[si]));

            for (std::size_t li = 0; li < cfg.lambda_schedule.size(); ++li) {
                const auto t0 = std::chrono::steady_clock::now();
                state.continuation_index = static_cast<int>(li);
                state.epsilon = setup.epsilon_base / cfg.lambda_schedule[li];
                state.misfit_history.clear();
                state.current_misfit = -1.0;
                state.backtracks_u = 0;
                state.backtracks_theta = 0;

                StageRecord rec;
                rec.scale = factor;
                rec.continuation_index = static_cast<int>(li);
                rec.epsilon = state.epsilon;
                rec.mu = state.mu;
                rec.alpha_u = state.alpha_u;

                for (int n = 0; n < cfg.iters_per_stage; ++n) {
                    state = palm_iteration(std::move(state), prob.data, prob.pattern, setup.guide,
                                           cfg);
                    rec.feasibility_gap.push_back(state.last_feasibility_gap);
                    if (cfg.early_exit_on_stagnation && state.misfit_history.size() >= 2) {
                        const double prev =
                            state.misfit_history[state.misfit_history.size() - 2];
                        const double cur = state.misfit_history.back();
                        if (std::abs(prev - cur) <= cfg.stagnation_rtol * std::max(prev, 1e-300)) {
                            break;
                        }
                    }
                }

                rec.misfit_history = state.misfit_history;
                rec.backtracks_u = state.backtracks_u;
                rec.backtracks_theta = state.backtracks_theta;
                rec.seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                report.stages.push_back(std::move(rec));
            }

            u = std::move(state.u);
            trace = std::move(state.trace);
            report.final_misfit = state.current_misfit;
        }
    } catch (const DivergenceError& e) {
        report.diverged = true;
        report.divergence_message = e.what();
        result.u = std::move(u);
        result.trace = std::move(trace);
        return result;
    }

    result.u = std::move(u);
    result.trace = std::move(trace);
    return result;
}

}  // namespace rgmc
