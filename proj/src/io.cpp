#include "rgmc/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rgmc {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace {

using nlohmann::json;

std::filesystem::path payload_path(const std::filesystem::path& sidecar) {
    std::filesystem::path p = sidecar;
    p.replace_extension(".bin");
    return p;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InvalidInputError("JSON parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const std::streamsize size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> buf(static_cast<std::size_t>(size));
    in.read(buf.data(), size);
    if (!in) throw InvalidInputError("short read from " + path.string());
    return buf;
}

json pattern_to_json(const SamplingPattern& p) {
    json j;
    j["dims"] = p.dims;
    j["voxel_size_mm"] = p.voxel_mm;
    j["readout_axis"] = p.readout_axis;
    j["kind"] = to_string(p.kind);
    j["pe_coords"] = p.pe_coords;
    return j;
}

SamplingPattern pattern_from_json(const json& j) {
    SamplingPattern p;
    p.dims = j.at("dims").get<Shape3>();
    p.voxel_mm = j.at("voxel_size_mm").get<Vec3>();
    p.readout_axis = j.at("readout_axis").get<int>();
    p.kind = pattern_kind_from_string(j.at("kind").get<std::string>());
    p.pe_coords = j.at("pe_coords").get<std::vector<std::array<int, 2>>>();
    p.validate();
    return p;
}

double finite_or_string(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (j.at(key).is_string()) return fallback;  // "auto"
    return j.at(key).get<double>();
}

}  // namespace

void atomic_write_bytes(const std::filesystem::path& path, const void* data, std::size_t size) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidInputError("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw InvalidInputError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
    atomic_write_bytes(path, text.data(), text.size());
}

void write_volume_file(const std::filesystem::path& sidecar_path, const ComplexVolume3D& vol,
                       const std::string& kind, const std::string& dtype) {
    require_valid_grid(vol, "write_volume_file");
    const std::filesystem::path bin = payload_path(sidecar_path);

    if (dtype == "complex64") {
        std::vector<float> buf(vol.size() * 2);
        for (std::size_t i = 0; i < vol.size(); ++i) {
            buf[2 * i] = static_cast<float>(vol.data[i].real());
            buf[2 * i + 1] = static_cast<float>(vol.data[i].imag());
        }
        atomic_write_bytes(bin, buf.data(), buf.size() * sizeof(float));
    } else if (dtype == "float32") {
        std::vector<float> buf(vol.size());
        for (std::size_t i = 0; i < vol.size(); ++i) {
            buf[i] = static_cast<float>(std::abs(vol.data[i]));
        }
        atomic_write_bytes(bin, buf.data(), buf.size() * sizeof(float));
    } else {
        throw InvalidParameterError("write_volume_file: unknown dtype " + dtype);
    }

    json j;
    j["dims"] = vol.dims;
    j["voxel_size_mm"] = vol.voxel_mm;
    j["dtype"] = dtype;
    j["kind"] = kind;
    j["axis_convention"] = AxisConvention::id;
    j["payload"] = bin.filename().string();
    atomic_write_text(sidecar_path, j.dump(2) + "\n");
}

ComplexVolume3D read_volume_file(const std::filesystem::path& sidecar_path, VolumeFileMeta* meta) {
    const json j = read_json_file(sidecar_path);
    VolumeFileMeta m;
    m.dims = j.at("dims").get<Shape3>();
    m.voxel_mm = j.at("voxel_size_mm").get<Vec3>();
    m.dtype = j.at("dtype").get<std::string>();
    m.kind = j.value("kind", "image");
    for (int a = 0; a < 3; ++a) {
        if (m.dims[a] < 1) throw InvalidInputError("volume sidecar: dims must be positive");
    }

    const std::filesystem::path bin = sidecar_path.parent_path() / j.at("payload").get<std::string>();
    const std::vector<char> bytes = read_bytes(bin);
    const std::size_t n = static_cast<std::size_t>(m.dims[0]) * m.dims[1] * m.dims[2];

    ComplexVolume3D vol(m.dims, m.voxel_mm);
    if (m.dtype == "complex64") {
        if (bytes.size() != n * 2 * sizeof(float)) {
            throw InvalidInputError("volume payload size does not match dims");
        }
        const float* f = reinterpret_cast<const float*>(bytes.data());
        for (std::size_t i = 0; i < n; ++i) vol.data[i] = cdouble(f[2 * i], f[2 * i + 1]);
    } else if (m.dtype == "float32") {
        if (bytes.size() != n * sizeof(float)) {
            throw InvalidInputError("volume payload size does not match dims");
        }
        const float* f = reinterpret_cast<const float*>(bytes.data());
        for (std::size_t i = 0; i < n; ++i) vol.data[i] = cdouble(f[i], 0.0);
    } else {
        throw InvalidInputError("volume sidecar: unknown dtype " + m.dtype);
    }
    if (meta) *meta = m;
    return vol;
}

void write_kspace_file(const std::filesystem::path& sidecar_path, const KSpaceData& data) {
    data.validate();
    std::vector<float> buf(data.samples.size() * 2);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        buf[2 * i] = static_cast<float>(data.samples[i].real());
        buf[2 * i + 1] = static_cast<float>(data.samples[i].imag());
    }
    const std::filesystem::path bin = payload_path(sidecar_path);
    atomic_write_bytes(bin, buf.data(), buf.size() * sizeof(float));

    json j = pattern_to_json(data.pattern);
    j["dtype"] = "complex64";
    j["kind"] = "kspace";
    j["noise_sigma"] = data.noise_sigma;
    j["out_of_band_zeroed"] = data.out_of_band_zeroed;
    j["payload"] = bin.filename().string();
    atomic_write_text(sidecar_path, j.dump(2) + "\n");
}

KSpaceData read_kspace_file(const std::filesystem::path& sidecar_path) {
    const json j = read_json_file(sidecar_path);
    KSpaceData data;
    data.pattern = pattern_from_json(j);
    data.noise_sigma = j.value("noise_sigma", 0.0);
    data.out_of_band_zeroed = j.value("out_of_band_zeroed", std::size_t{0});

    const std::filesystem::path bin = sidecar_path.parent_path() / j.at("payload").get<std::string>();
    const std::vector<char> bytes = read_bytes(bin);
    const std::size_t n = data.n_t() * data.n_r();
    if (bytes.size() != n * 2 * sizeof(float)) {
        throw InvalidInputError("k-space payload size does not match pattern");
    }
    const float* f = reinterpret_cast<const float*>(bytes.data());
    data.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) data.samples[i] = cdouble(f[2 * i], f[2 * i + 1]);
    data.validate();
    return data;
}

void write_pattern_json(const std::filesystem::path& path, const SamplingPattern& pattern) {
    pattern.validate();
    atomic_write_text(path, pattern_to_json(pattern).dump(2) + "\n");
}

SamplingPattern read_pattern_json(const std::filesystem::path& path) {
    return pattern_from_json(read_json_file(path));
}

void write_trace_csv(const std::filesystem::path& path, const MotionTrace& trace) {
    std::ostringstream os;
    os << "t,tau_x_mm,tau_y_mm,tau_z_mm,phi_xy_deg,phi_xz_deg,phi_yz_deg\n";
    constexpr double rad2deg = 180.0 / 3.14159265358979323846;
    char line[256];
    for (std::size_t t = 0; t < trace.size(); ++t) {
        const RigidParams& p = trace[t];
        std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t,
                      p.tau_mm[0], p.tau_mm[1], p.tau_mm[2], p.phi_rad[0] * rad2deg,
                      p.phi_rad[1] * rad2deg, p.phi_rad[2] * rad2deg);
        os << line;
    }
    atomic_write_text(path, os.str());
}

MotionTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("empty trace CSV");
    if (line.rfind("t,tau_x_mm", 0) != 0) {
        throw InvalidInputError("trace CSV: unexpected header");
    }
    constexpr double deg2rad = 3.14159265358979323846 / 180.0;
    MotionTrace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t t = 0;
        double v[6];
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf", &t, &v[0], &v[1], &v[2],
                        &v[3], &v[4], &v[5]) != 7) {
            throw InvalidInputError("trace CSV: malformed row: " + line);
        }
        trace.emplace_back(Vec3{v[0], v[1], v[2]},
                           Vec3{v[3] * deg2rad, v[4] * deg2rad, v[5] * deg2rad});
    }
    return trace;
}

SolverConfig read_solver_config(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    SolverConfig cfg;
    if (j.contains("scales")) cfg.scales = j.at("scales").get<std::vector<int>>();
    if (j.contains("lambda_schedule")) {
        cfg.lambda_schedule = j.at("lambda_schedule").get<std::vector<double>>();
    }
    if (j.contains("iters_per_stage")) cfg.iters_per_stage = j.at("iters_per_stage").get<int>();
    cfg.alpha_u = finite_or_string(j, "alpha_u", 0.0);
    cfg.alpha_theta = finite_or_string(j, "alpha_theta", 0.0);
    if (j.contains("knots_per_scale")) {
        cfg.knots_per_scale = j.at("knots_per_scale").get<std::vector<int>>();
    }
    if (j.contains("mode")) {
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "guided") cfg.mode = RegMode::guided;
        else if (mode == "plain-tv") cfg.mode = RegMode::plain_tv;
        else throw InvalidParameterError("solver config: unknown mode " + mode);
    }
    cfg.epsilon_base = finite_or_string(j, "epsilon_base", 0.0);
    cfg.eta = finite_or_string(j, "eta", 0.0);
    cfg.mu = finite_or_string(j, "mu", -1.0);
    if (j.contains("inner_iters")) cfg.inner_iters = j.at("inner_iters").get<int>();
    if (j.contains("inner_tol")) cfg.inner_tol = j.at("inner_tol").get<double>();
    if (j.contains("early_exit_on_stagnation")) {
        cfg.early_exit_on_stagnation = j.at("early_exit_on_stagnation").get<bool>();
    }
    if (j.contains("nufft")) {
        const json& nj = j.at("nufft");
        if (nj.contains("oversampling")) cfg.nufft.oversampling = nj.at("oversampling").get<double>();
        if (nj.contains("kernel_width")) cfg.nufft.kernel_width = nj.at("kernel_width").get<int>();
        if (nj.contains("tolerance")) cfg.nufft.tolerance = nj.at("tolerance").get<double>();
    }
    cfg.validate();
    return cfg;
}

void write_solver_config(const std::filesystem::path& path, const SolverConfig& cfg) {
    json j;
    j["scales"] = cfg.scales;
    j["lambda_schedule"] = cfg.lambda_schedule;
    j["iters_per_stage"] = cfg.iters_per_stage;
    j["alpha_u"] = cfg.alpha_u;
    j["alpha_theta"] = cfg.alpha_theta;
    j["knots_per_scale"] = cfg.knots_per_scale;
    j["mode"] = (cfg.mode == RegMode::guided) ? "guided" : "plain-tv";
    j["epsilon_base"] = cfg.epsilon_base;
    j["eta"] = cfg.eta;
    j["mu"] = cfg.mu;
    j["inner_iters"] = cfg.inner_iters;
    j["inner_tol"] = cfg.inner_tol;
    j["early_exit_on_stagnation"] = cfg.early_exit_on_stagnation;
    j["nufft"] = {{"oversampling", cfg.nufft.oversampling},
                  {"kernel_width", cfg.nufft.kernel_width},
                  {"tolerance", cfg.nufft.tolerance}};
    atomic_write_text(path, j.dump(2) + "\n");
}

PhantomSpec read_phantom_spec(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    PhantomSpec spec;
    if (j.contains("dims")) spec.dims = j.at("dims").get<Shape3>();
    if (j.contains("voxel_size_mm")) spec.voxel_mm = j.at("voxel_size_mm").get<Vec3>();
    if (j.contains("n_channels")) spec.n_channels = j.at("n_channels").get<int>();
    if (j.contains("lesion")) spec.lesion = j.at("lesion").get<bool>();
    if (j.contains("supersample")) spec.supersample = j.at("supersample").get<int>();
    if (j.contains("ellipsoids")) {
        for (const json& je : j.at("ellipsoids")) {
            Ellipsoid e;
            e.center_mm = je.at("center_mm").get<Vec3>();
            e.semi_axes_mm = je.at("semi_axes_mm").get<Vec3>();
            if (je.contains("orientation_rad")) {
                e.orientation_rad = je.at("orientation_rad").get<Vec3>();
            }
            e.intensity = je.at("intensity").get<std::vector<double>>();
            spec.ellipsoids.push_back(std::move(e));
        }
    }
    spec.validate();
    return spec;
}

void write_phantom_spec(const std::filesystem::path& path, const PhantomSpec& spec) {
    json j;
    j["dims"] = spec.dims;
    j["voxel_size_mm"] = spec.voxel_mm;
    j["n_channels"] = spec.n_channels;
    j["lesion"] = spec.lesion;
    j["supersample"] = spec.supersample;
    json arr = json::array();
    for (const Ellipsoid& e : spec.ellipsoids) {
        arr.push_back({{"center_mm", e.center_mm},
                       {"semi_axes_mm", e.semi_axes_mm},
                       {"orientation_rad", e.orientation_rad},
                       {"intensity", e.intensity}});
    }
    j["ellipsoids"] = std::move(arr);
    atomic_write_text(path, j.dump(2) + "\n");
}

std::string report_to_json(const CorrectionReport& report, bool include_timings) {
    json stages = json::array();
    for (const StageRecord& s : report.stages) {
        json js;
        js["scale"] = s.scale;
        js["continuation_index"] = s.continuation_index;
        js["epsilon"] = s.epsilon;
        js["mu"] = s.mu;
        js["alpha_u"] = s.alpha_u;
        js["misfit_history"] = s.misfit_history;
        js["feasibility_gap"] = s.feasibility_gap;
        js["backtracks_u"] = s.backtracks_u;
        js["backtracks_theta"] = s.backtracks_theta;
        if (include_timings) js["seconds"] = s.seconds;
        stages.push_back(std::move(js));
    }
    json j;
    j["stages"] = std::move(stages);
    j["final_misfit"] = report.final_misfit;
    j["out_of_band_zeroed"] = report.out_of_band_zeroed;
    j["diverged"] = report.diverged;
    if (report.diverged) j["divergence_message"] = report.divergence_message;
    return j.dump(2) + "\n";
}

namespace {
json quality_json(const QualityReport& r) {
    auto enc = [](double v) -> json {
        if (std::isinf(v)) return "inf";
        return v;
    };
    json j;
    j["psnr_db"] = {{"volume", enc(r.psnr_volume)},
                    {"sagittal", enc(r.psnr_sagittal)},
                    {"coronal", enc(r.psnr_coronal)},
                    {"axial", enc(r.psnr_axial)}};
    j["ssim"] = {{"volume", r.ssim_volume},
                 {"sagittal", r.ssim_sagittal},
                 {"coronal", r.ssim_coronal},
                 {"axial", r.ssim_axial}};
    j["slice_indices"] = {{"sagittal_x", r.slice_x}, {"coronal_y", r.slice_y}, {"axial_z", r.slice_z}};
    return j;
}
}  // namespace

std::string quality_report_to_json(const QualityReport& rep) {
    return quality_json(rep).dump(2) + "\n";
}

std::string quality_report_csv_row(const QualityReport& r, const std::string& label) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", label.c_str(),
                  r.psnr_volume, r.psnr_sagittal, r.psnr_coronal, r.psnr_axial, r.ssim_volume,
                  r.ssim_sagittal, r.ssim_coronal, r.ssim_axial);
    return buf;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["tool_version"] = m.tool_version;
    json inputs = json::object(), outputs = json::object(), seeds = json::object(),
         timings = json::object();
    for (const auto& [k, v] : m.inputs) inputs[k] = v;
    for (const auto& [k, v] : m.outputs) outputs[k] = v;
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    for (const auto& [k, v] : m.timings_s) timings[k] = v;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seeds"] = seeds;
    j["timings_s"] = timings;
    j["config"] = json::parse(m.config_json);
    atomic_write_text(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    RunManifest m;
    m.command = j.value("command", "");
    m.tool_version = j.value("tool_version", "");
    for (const auto& [k, v] : j.value("inputs", json::object()).items()) {
        m.inputs.emplace_back(k, v.get<std::string>());
    }
    for (const auto& [k, v] : j.value("outputs", json::object()).items()) {
        m.outputs.emplace_back(k, v.get<std::string>());
    }
    for (const auto& [k, v] : j.value("seeds", json::object()).items()) {
        m.seeds.emplace_back(k, v.get<std::uint64_t>());
    }
    for (const auto& [k, v] : j.value("timings_s", json::object()).items()) {
        m.timings_s.emplace_back(k, v.get<double>());
    }
    m.config_json = j.value("config", json::object()).dump();
    return m;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw InvalidInputError("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

}  // namespace rgmc
