#include "rgmc/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "rgmc/fft.hpp"

namespace rgmc {

namespace {

constexpr double kPi = std::numbers::pi;

double k_of_coord(int m, int n, double voxel) { return 2.0 * kPi * m / (n * voxel); }

struct RotatedPoints {
    std::vector<Vec3> pts;        // rotated k for every (t, r), placeholder at zeroed slots
    std::vector<unsigned char> oob;  // 1 where the rotated point left the band
    std::size_t oob_count = 0;
};

RotatedPoints rotate_pattern_points(const MotionTrace& trace, const SamplingPattern& pattern) {
    const std::size_t n_t = pattern.n_lines();
    const std::size_t n_r = static_cast<std::size_t>(pattern.n_readout());
    RotatedPoints out;
    out.pts.resize(n_t * n_r);
    out.oob.assign(n_t * n_r, 0);
    for (std::size_t t = 0; t < n_t; ++t) {
        const Mat3 rt = rotation_matrix(trace[t].phi_rad).transposed();
        for (std::size_t r = 0; r < n_r; ++r) {
            const Vec3 k = pattern.kpoint(t, static_cast<int>(r));
            Vec3 kr = rt.apply(k);
            const std::size_t idx = t * n_r + r;
            if (!in_band(kr, pattern.voxel_mm)) {
                out.oob[idx] = 1;
                ++out.oob_count;
                kr = {0.0, 0.0, 0.0};
            }
            out.pts[idx] = kr;
        }
    }
    return out;
}

void check_shapes(const ComplexVolume3D& vol, const MotionTrace& trace,
                  const SamplingPattern& pattern, const char* what) {
    if (vol.dims != pattern.dims) {
        throw InvalidInputError(std::string(what) + ": volume dims do not match pattern grid");
    }
    if (vol.voxel_mm != pattern.voxel_mm) {
        throw InvalidInputError(std::string(what) + ": voxel size mismatch");
    }
    if (trace.size() != pattern.n_lines()) {
        std::ostringstream os;
        os << what << ": trace length " << trace.size() << " != line count "
           << pattern.n_lines();
        throw InvalidInputError(os.str());
    }
}

}  // namespace

std::string to_string(PatternKind k) {
    switch (k) {
        case PatternKind::full: return "full";
        case PatternKind::randomized: return "randomized";
        case PatternKind::linear: return "linear";
    }
    return "full";
}

PatternKind pattern_kind_from_string(const std::string& s) {
    if (s == "full") return PatternKind::full;
    if (s == "randomized") return PatternKind::randomized;
    if (s == "linear") return PatternKind::linear;
    throw InvalidParameterError("unknown sampling pattern kind: " + s);
}

std::array<int, 2> SamplingPattern::pe_axes() const {
    switch (readout_axis) {
        case 0: return {1, 2};
        case 1: return {0, 2};
        case 2: return {0, 1};
        default: throw InvalidParameterError("SamplingPattern: readout_axis must be 0, 1 or 2");
    }
}

Vec3 SamplingPattern::kpoint(std::size_t t, int r) const {
    const std::array<int, 2> pe = pe_axes();
    Vec3 k{};
    const int mr = r - dims[readout_axis] / 2;
    k[readout_axis] = k_of_coord(mr, dims[readout_axis], voxel_mm[readout_axis]);
    for (int a = 0; a < 2; ++a) {
        const int axis = pe[a];
        k[axis] = k_of_coord(pe_coords[t][a], dims[axis], voxel_mm[axis]);
    }
    return k;
}

void SamplingPattern::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 2) throw InvalidInputError("SamplingPattern: dims must be >= 2");
        if (!(voxel_mm[a] > 0.0)) throw InvalidInputError("SamplingPattern: voxel must be > 0");
    }
    const std::array<int, 2> pe = pe_axes();
    std::set<std::array<int, 2>> seen;
    for (const std::array<int, 2>& c : pe_coords) {
        for (int a = 0; a < 2; ++a) {
            const int n = dims[pe[a]];
            if (c[a] < -n / 2 || c[a] >= (n + 1) / 2) {
                throw InvalidInputError("SamplingPattern: phase-encoding coordinate off grid");
            }
        }
        if (!seen.insert(c).second) {
            throw InvalidInputError("SamplingPattern: duplicate phase-encoding coordinate");
        }
    }
}

void KSpaceData::validate() const {
    pattern.validate();
    if (samples.size() != n_t() * n_r()) {
        throw InvalidInputError("KSpaceData: sample count does not match pattern shape");
    }
}

KSpaceData perturbed_fourier(const ComplexVolume3D& vol, const MotionTrace& trace,
                             const SamplingPattern& pattern, const NufftConfig& cfg) {
    check_shapes(vol, trace, pattern, "perturbed_fourier");
    require_finite(vol, "perturbed_fourier");

    const RotatedPoints rp = rotate_pattern_points(trace, pattern);
    auto engine = get_nufft_engine(vol.dims, vol.voxel_mm, cfg);
    std::vector<cdouble> values = engine->type2(vol, rp.pts);

    KSpaceData out;
    out.pattern = pattern;
    out.samples.resize(values.size());
    out.out_of_band_zeroed = rp.oob_count;
    const double unitary = 1.0 / std::sqrt(static_cast<double>(vol.size()));
    const std::size_t n_r = out.n_r();
    for (std::size_t t = 0; t < out.n_t(); ++t) {
        const Vec3& tau = trace[t].tau_mm;
        for (std::size_t r = 0; r < n_r; ++r) {
            const std::size_t idx = t * n_r + r;
            if (rp.oob[idx]) {
                out.samples[idx] = 0.0;
                continue;
            }
            const Vec3 k = pattern.kpoint(t, static_cast<int>(r));
            const double ph = -(k[0] * tau[0] + k[1] * tau[1] + k[2] * tau[2]);
            out.samples[idx] = values[idx] * unitary * std::polar(1.0, ph);
        }
    }
    return out;
}

ComplexVolume3D perturbed_fourier_adjoint(const KSpaceData& data, const MotionTrace& trace,
                                          const SamplingPattern& pattern, const NufftConfig& cfg) {
    data.validate();
    if (data.pattern.pe_coords != pattern.pe_coords || data.pattern.dims != pattern.dims) {
        throw InvalidInputError("perturbed_fourier_adjoint: data pattern mismatch");
    }
    if (trace.size() != pattern.n_lines()) {
        throw InvalidInputError("perturbed_fourier_adjoint: trace length mismatch");
    }

    const RotatedPoints rp = rotate_pattern_points(trace, pattern);
    std::vector<cdouble> weighted(data.samples.size());
    const std::size_t n_r = data.n_r();
    for (std::size_t t = 0; t < data.n_t(); ++t) {
        const Vec3& tau = trace[t].tau_mm;
        for (std::size_t r = 0; r < n_r; ++r) {
            const std::size_t idx = t * n_r + r;
            if (rp.oob[idx]) {
                weighted[idx] = 0.0;
                continue;
            }
            const Vec3 k = pattern.kpoint(t, static_cast<int>(r));
            const double ph = k[0] * tau[0] + k[1] * tau[1] + k[2] * tau[2];
            weighted[idx] = data.samples[idx] * std::polar(1.0, ph);
        }
    }

    auto engine = get_nufft_engine(pattern.dims, pattern.voxel_mm, cfg);
    ComplexVolume3D out = engine->type2_adjoint(weighted, rp.pts);
    const double unitary =
        1.0 / std::sqrt(static_cast<double>(pattern.dims[0]) * pattern.dims[1] * pattern.dims[2]);
    for (cdouble& c : out.data) c *= unitary;
    return out;
}

double misfit(const ComplexVolume3D& u, const MotionTrace& trace, const KSpaceData& data,
              const NufftConfig& cfg) {
    data.validate();
    const KSpaceData model = perturbed_fourier(u, trace, data.pattern, cfg);
    double s = 0.0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        s += 0.5 * std::norm(model.samples[i] - data.samples[i]);
    }
    return s;
}

ComplexVolume3D grad_u(const ComplexVolume3D& u, const MotionTrace& trace, const KSpaceData& data,
                       const NufftConfig& cfg) {
    data.validate();
    KSpaceData residual = perturbed_fourier(u, trace, data.pattern, cfg);
    for (std::size_t i = 0; i < residual.samples.size(); ++i) {
        residual.samples[i] -= data.samples[i];
    }
    return perturbed_fourier_adjoint(residual, trace, data.pattern, cfg);
}

ThetaDerivatives grad_theta(const ComplexVolume3D& u, const MotionTrace& trace,
                            const KSpaceData& data, const NufftConfig& cfg) {
    data.validate();
    const SamplingPattern& pattern = data.pattern;
    check_shapes(u, trace, pattern, "grad_theta");

    // Coordinate-weighted volumes (-i x_a) u(x) give the frequency gradient of
    // the spectrum; they share one batched NUFFT with the model itself.
    std::array<ComplexVolume3D, 3> weighted;
    for (int a = 0; a < 3; ++a) {
        weighted[a] = ComplexVolume3D(u.dims, u.voxel_mm);
    }
    for (int z = 0; z < u.dims[2]; ++z) {
        for (int y = 0; y < u.dims[1]; ++y) {
            for (int x = 0; x < u.dims[0]; ++x) {
                const std::size_t i = u.index(x, y, z);
                const cdouble miu = cdouble(0.0, -1.0) * u.data[i];
                weighted[0].data[i] = miu * u.coord_mm(x, 0);
                weighted[1].data[i] = miu * u.coord_mm(y, 1);
                weighted[2].data[i] = miu * u.coord_mm(z, 2);
            }
        }
    }

    const RotatedPoints rp = rotate_pattern_points(trace, pattern);
    auto engine = get_nufft_engine(u.dims, u.voxel_mm, cfg);
    const std::array<const ComplexVolume3D*, 4> vols{&u, &weighted[0], &weighted[1], &weighted[2]};
    const auto spectra = engine->type2_batch(vols, rp.pts);

    ThetaDerivatives out;
    const std::size_t n_t = pattern.n_lines();
    const std::size_t n_r = static_cast<std::size_t>(pattern.n_readout());
    out.grad.assign(n_t, {});
    out.curvature.assign(n_t, {});
    const double unitary = 1.0 / std::sqrt(static_cast<double>(u.size()));

    for (std::size_t t = 0; t < n_t; ++t) {
        const Vec3& tau = trace[t].tau_mm;
        const std::array<Mat3, 3> drot = rotation_matrix_derivatives(trace[t].phi_rad);
        std::array<double, 6>& g = out.grad[t];
        std::array<double, 6>& h = out.curvature[t];
        for (std::size_t r = 0; r < n_r; ++r) {
            const std::size_t idx = t * n_r + r;
            if (rp.oob[idx]) {
                out.misfit_value += 0.5 * std::norm(data.samples[idx]);
                continue;
            }
            const Vec3 k = pattern.kpoint(t, static_cast<int>(r));
            const double ph = -(k[0] * tau[0] + k[1] * tau[1] + k[2] * tau[2]);
            const cdouble phase = unitary * std::polar(1.0, ph);
            const cdouble model = phase * spectra[0][idx];
            const cdouble res = model - data.samples[idx];
            out.misfit_value += 0.5 * std::norm(res);
            const cdouble cres = std::conj(res);
            for (int a = 0; a < 3; ++a) {
                // d model / d tau_a = -i k_a model
                const cdouble dm = cdouble(0.0, -k[a]) * model;
                g[a] += (cres * dm).real();
                h[a] += std::norm(dm);
            }
            for (int a = 0; a < 3; ++a) {
                // d model / d phi_a via the rotated-frequency chain rule
                const Vec3 dk = drot[a].transposed().apply(k);
                const cdouble dspec = dk[0] * spectra[1][idx] + dk[1] * spectra[2][idx] +
                                      dk[2] * spectra[3][idx];
                const cdouble dm = phase * dspec;
                g[3 + a] += (cres * dm).real();
                h[3 + a] += std::norm(dm);
            }
        }
    }
    return out;
}

ComplexVolume3D rigid_resample(const ComplexVolume3D& vol, const RigidParams& params,
                               const NufftConfig& cfg) {
    require_valid_grid(vol, "rigid_resample");
    if (params.is_zero()) return vol;
    SamplingPattern full;
    full.dims = vol.dims;
    full.voxel_mm = vol.voxel_mm;
    full.readout_axis = 0;
    full.kind = PatternKind::full;
    const std::array<int, 2> pe = full.pe_axes();
    for (int m2 = -vol.dims[pe[1]] / 2; m2 < (vol.dims[pe[1]] + 1) / 2; ++m2) {
        for (int m1 = -vol.dims[pe[0]] / 2; m1 < (vol.dims[pe[0]] + 1) / 2; ++m1) {
            full.pe_coords.push_back({m1, m2});
        }
    }
    const MotionTrace trace(full.n_lines(), params);
    const KSpaceData spec = perturbed_fourier(vol, trace, full, cfg);

    // Samples arrive ordered (pe2, pe1, readout); scatter into the centered
    // spectrum grid and invert.
    ComplexVolume3D grid(vol.dims, vol.voxel_mm);
    const std::size_t n_r = spec.n_r();
    for (std::size_t t = 0; t < spec.n_t(); ++t) {
        std::array<int, 3> mi{};
        mi[pe[0]] = full.pe_coords[t][0] + vol.dims[pe[0]] / 2;
        mi[pe[1]] = full.pe_coords[t][1] + vol.dims[pe[1]] / 2;
        for (std::size_t r = 0; r < n_r; ++r) {
            mi[full.readout_axis] = static_cast<int>(r);
            grid.at(mi[0], mi[1], mi[2]) = spec.at(t, r);
        }
    }
    return ifft3_centered(grid);
}

}  // namespace rgmc
