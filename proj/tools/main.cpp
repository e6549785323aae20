#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include "rgmc/fft.hpp"
#include "rgmc/io.hpp"
#include "rgmc/metrics.hpp"
#include "rgmc/optimizer.hpp"
#include "rgmc/simulation.hpp"

namespace fs = std::filesystem;
using namespace rgmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

Shape3 parse_dims(const std::string& s) {
    Shape3 d{};
    if (std::sscanf(s.c_str(), "%d,%d,%d", &d[0], &d[1], &d[2]) != 3) {
        throw InvalidParameterError("expected dims as nx,ny,nz: " + s);
    }
    return d;
}

int parse_axis(const std::string& s) {
    if (s == "x" || s == "0") return 0;
    if (s == "y" || s == "1") return 1;
    if (s == "z" || s == "2") return 2;
    throw InvalidParameterError("readout axis must be x, y or z");
}

// Central-slice magnitude PNGs windowed to [0, p99.5], matching the
// sagittal / coronal / axial reporting layout.
void write_slice_pngs(const fs::path& dir, const std::string& stem, const ComplexVolume3D& vol,
                      RunManifest& manifest) {
    const std::vector<double> mag = magnitude(vol);
    const double hi = percentile(mag, 99.5);
    struct Item {
        SlicePlane plane;
        const char* name;
        int index;
    };
    const Item items[] = {{SlicePlane::sagittal, "sagittal", vol.dims[0] / 2},
                          {SlicePlane::coronal, "coronal", vol.dims[1] / 2},
                          {SlicePlane::axial, "axial", vol.dims[2] / 2}};
    for (const Item& it : items) {
        Shape3 sd{};
        const std::vector<double> slice = extract_slice(mag, vol.dims, it.plane, it.index, sd);
        int w = 0, h = 0;
        if (it.plane == SlicePlane::sagittal) w = sd[1], h = sd[2];
        else if (it.plane == SlicePlane::coronal) w = sd[0], h = sd[2];
        else w = sd[0], h = sd[1];
        const fs::path p = dir / (stem + "_" + it.name + ".png");
        write_png_gray(p, slice, w, h, hi);
        manifest.outputs.emplace_back(std::string("png_") + it.name, p.filename().string());
    }
}

struct PhantomArgs {
    std::string out;
    std::string preset = "two-contrast-64";
    std::string spec_path;
    std::string dims = "64,64,64";
    bool lesion = false;
};

int cmd_phantom(const PhantomArgs& a) {
    Timer timer;
    fs::create_directories(a.out);
    PhantomSpec spec;
    if (!a.spec_path.empty()) {
        spec = read_phantom_spec(a.spec_path);
    } else if (a.preset == "two-contrast-64") {
        spec = default_two_contrast_spec(parse_dims(a.dims), {1.0, 1.0, 1.0}, a.lesion);
    } else {
        throw InvalidParameterError("unknown phantom preset: " + a.preset);
    }
    const std::vector<ComplexVolume3D> channels = make_phantom(spec);

    RunManifest manifest;
    manifest.command = "phantom";
    write_phantom_spec(fs::path(a.out) / "phantom_spec.json", spec);
    manifest.outputs.emplace_back("spec", "phantom_spec.json");
    for (std::size_t c = 0; c < channels.size(); ++c) {
        const std::string name =
            (c == 0) ? "phantom_target.json"
                     : (c == 1) ? "phantom_reference.json"
                                : "phantom_ch" + std::to_string(c) + ".json";
        write_volume_file(fs::path(a.out) / name, channels[c]);
        manifest.outputs.emplace_back("channel" + std::to_string(c), name);
    }
    manifest.timings_s.emplace_back("total", timer.seconds());
    write_manifest(fs::path(a.out) / "manifest.json", manifest);
    return kExitOk;
}

struct SimulateArgs {
    std::string truth;
    std::string out;
    std::string pattern = "randomized";
    int accel = 2;
    std::uint64_t seed = 1;
    int pose_changes = 1;
    double max_trans_mm = 3.0;
    double max_rot_deg = 5.0;
    double noise = 0.0;
    std::string trace = "";  // empty = scripted; "identity" or a CSV path
    std::string readout = "x";
};

int cmd_simulate(const SimulateArgs& a) {
    Timer timer;
    fs::create_directories(a.out);
    const ComplexVolume3D truth = read_volume_file(a.truth);

    const SamplingPattern pattern =
        make_sampling_pattern(truth.dims, pattern_kind_from_string(a.pattern), a.accel, a.seed,
                              parse_axis(a.readout), truth.voxel_mm);

    MotionTrace trace;
    std::vector<std::size_t> transitions;
    if (a.trace == "identity") {
        trace = identity_trace(pattern.n_lines());
    } else if (!a.trace.empty()) {
        trace = read_trace_csv(a.trace);
        if (trace.size() != pattern.n_lines()) {
            throw InvalidInputError("trace CSV length does not match the pattern line count");
        }
    } else {
        MotionScript script = make_motion_script(pattern.n_lines(), a.pose_changes, a.max_trans_mm,
                                                 a.max_rot_deg, a.seed);
        trace = std::move(script.trace);
        transitions = std::move(script.transitions);
    }

    const NufftConfig nufft;
    const KSpaceData data = simulate_acquisition(truth, trace, pattern, a.noise, a.seed + 1, nufft);
    const ComplexVolume3D zf =
        perturbed_fourier_adjoint(data, identity_trace(trace.size()), pattern, nufft);

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.inputs.emplace_back("truth", a.truth);
    manifest.seeds.emplace_back("pattern_and_script", a.seed);
    manifest.seeds.emplace_back("noise", a.seed + 1);
    write_kspace_file(fs::path(a.out) / "kspace.json", data);
    write_pattern_json(fs::path(a.out) / "pattern.json", pattern);
    write_trace_csv(fs::path(a.out) / "trace_true.csv", trace);
    write_volume_file(fs::path(a.out) / "zero_filled.json", zf);
    manifest.outputs.emplace_back("kspace", "kspace.json");
    manifest.outputs.emplace_back("pattern", "pattern.json");
    manifest.outputs.emplace_back("trace_true", "trace_true.csv");
    manifest.outputs.emplace_back("zero_filled", "zero_filled.json");
    manifest.timings_s.emplace_back("total", timer.seconds());
    write_manifest(fs::path(a.out) / "manifest.json", manifest);
    return kExitOk;
}

struct CorrectArgs {
    std::string data;
    std::string pattern;
    std::string reference;
    std::string out;
    std::string config;
    std::string mode = "guided";
    int iters = -1;
};

int cmd_correct(const CorrectArgs& a) {
    Timer timer;
    fs::create_directories(a.out);
    const KSpaceData data = read_kspace_file(a.data);
    const SamplingPattern pattern =
        a.pattern.empty() ? data.pattern : read_pattern_json(a.pattern);

    SolverConfig cfg;
    if (!a.config.empty()) cfg = read_solver_config(a.config);
    if (a.mode == "plain-tv") cfg.mode = RegMode::plain_tv;
    else if (a.mode == "guided") cfg.mode = RegMode::guided;
    else throw InvalidParameterError("mode must be guided or plain-tv");
    if (a.iters > 0) cfg.iters_per_stage = a.iters;

    ComplexVolume3D reference;
    if (cfg.mode == RegMode::guided) {
        if (a.reference.empty()) {
            throw InvalidParameterError("guided mode requires --reference");
        }
        reference = read_volume_file(a.reference);
    } else {
        reference = ComplexVolume3D(pattern.dims, pattern.voxel_mm);
    }

    const CorrectionResult result = run_correction(data, pattern, reference, cfg);

    RunManifest manifest;
    manifest.command = "correct";
    manifest.inputs.emplace_back("data", a.data);
    if (!a.pattern.empty()) manifest.inputs.emplace_back("pattern", a.pattern);
    if (!a.reference.empty()) manifest.inputs.emplace_back("reference", a.reference);

    write_volume_file(fs::path(a.out) / "corrected.json", result.u);
    write_trace_csv(fs::path(a.out) / "trace_estimated.csv", result.trace);
    atomic_write_text(fs::path(a.out) / "report.json",
                      report_to_json(result.report, /*include_timings=*/true));
    write_slice_pngs(a.out, "corrected", result.u, manifest);
    manifest.outputs.emplace_back("corrected", "corrected.json");
    manifest.outputs.emplace_back("trace_estimated", "trace_estimated.csv");
    manifest.outputs.emplace_back("report", "report.json");
    manifest.timings_s.emplace_back("total", timer.seconds());
    write_manifest(fs::path(a.out) / "manifest.json", manifest);

    if (result.report.diverged) {
        std::cerr << "rgmc correct: diverged (" << result.report.divergence_message
                  << "); last good outputs written to " << a.out << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

struct MetricsArgs {
    std::string test;
    std::string ref;
    std::string out;
    std::string csv;
    std::string label = "run";
};

int cmd_metrics(const MetricsArgs& a) {
    const ComplexVolume3D x = read_volume_file(a.test);
    const ComplexVolume3D r = read_volume_file(a.ref);
    const QualityReport rep = quality_report(x, r);
    const std::string js = quality_report_to_json(rep);
    std::cout << js;
    if (!a.out.empty()) atomic_write_text(a.out, js);
    if (!a.csv.empty()) {
        std::string row = quality_report_csv_row(rep, a.label);
        std::string existing;
        if (fs::exists(a.csv)) {
            std::ifstream in(a.csv);
            existing.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        } else {
            existing =
                "label,psnr_volume,psnr_sagittal,psnr_coronal,psnr_axial,"
                "ssim_volume,ssim_sagittal,ssim_coronal,ssim_axial\n";
        }
        atomic_write_text(a.csv, existing + row);
    }
    return kExitOk;
}

struct BenchArgs {
    std::string out;
    std::string profile = "full";
    std::uint64_t seed = 1234;
};

// Benchmark matrix: simulate + correct + evaluate for each motion complexity,
// plus the blind-TV baseline and the misregistered-reference case. The main
// report excludes wall-clock times so identical seeds give identical bytes.
int cmd_bench(const BenchArgs& a) {
    if (a.profile != "full" && a.profile != "quick") {
        throw InvalidParameterError("bench profile must be full or quick");
    }
    const bool quick = a.profile == "quick";
    fs::create_directories(a.out);

    const Shape3 dims = quick ? Shape3{32, 32, 32} : Shape3{64, 64, 64};
    SolverConfig cfg;
    if (quick) {
        cfg.scales = {2, 1};
        cfg.iters_per_stage = 6;
    }

    const PhantomSpec spec = default_two_contrast_spec(dims);
    const std::vector<ComplexVolume3D> channels = make_phantom(spec);
    const ComplexVolume3D& truth = channels[0];
    const ComplexVolume3D& reference = channels[1];

    struct Case {
        std::string name;
        int pose_changes;
        RegMode mode;
        bool misregistered;
    };
    const std::vector<Case> cases = {
        {"poses1_guided", 1, RegMode::guided, false},
        {"poses2_guided", 2, RegMode::guided, false},
        {"poses5_guided", 5, RegMode::guided, false},
        {"poses5_plain_tv", 5, RegMode::plain_tv, false},
        {"poses1_misreg_ref", 1, RegMode::guided, true},
    };

    nlohmann::json report;
    report["profile"] = a.profile;
    report["dims"] = dims;
    report["seed"] = a.seed;
    nlohmann::json timings = nlohmann::json::object();
    const RigidParams misreg({2.0, 0.0, -1.0},
                             {2.0 * std::numbers::pi / 180.0, 0.0, 1.0 * std::numbers::pi / 180.0});

    for (const Case& c : cases) {
        Timer case_timer;
        const fs::path dir = fs::path(a.out) / c.name;
        fs::create_directories(dir);

        const SamplingPattern pattern = make_sampling_pattern(
            dims, PatternKind::randomized, 2, a.seed, 0, truth.voxel_mm);
        const MotionScript script = make_motion_script(
            pattern.n_lines(), static_cast<std::size_t>(c.pose_changes), 3.0, 5.0, a.seed + 7);
        const KSpaceData data =
            simulate_acquisition(truth, script.trace, pattern, 0.0, a.seed + 11, cfg.nufft);

        SolverConfig run_cfg = cfg;
        run_cfg.mode = c.mode;
        ComplexVolume3D ref_in = reference;
        if (c.misregistered) ref_in = rigid_resample(reference, misreg, cfg.nufft);

        const CorrectionResult result = run_correction(data, pattern, ref_in, run_cfg);

        // Corrupted baseline: zero-filled reconstruction of the raw data.
        const ComplexVolume3D zf =
            perturbed_fourier_adjoint(data, identity_trace(data.n_t()), pattern, cfg.nufft);

        ComplexVolume3D aligned = result.u;
        const RigidParams* gauge = nullptr;
        RigidParams inv_misreg;
        if (c.misregistered) {
            // The solver reconstructs in the reference frame; undo the known
            // offset before scoring against the truth.
            inv_misreg = inverse(misreg);
            aligned = rigid_resample(result.u, misreg, cfg.nufft);
            gauge = &inv_misreg;
        }

        const QualityReport q_corr = quality_report(aligned, truth);
        const QualityReport q_zf = quality_report(zf, truth);
        const std::size_t exclusion = std::max<std::size_t>(2, pattern.n_lines() / 100);
        const TraceErrorStats terr =
            compare_traces(result.trace, script.trace, script.transitions, exclusion, gauge);

        write_volume_file(dir / "corrected.json", result.u);
        write_trace_csv(dir / "trace_estimated.csv", result.trace);
        write_trace_csv(dir / "trace_true.csv", script.trace);
        atomic_write_text(dir / "report.json", report_to_json(result.report, true));

        nlohmann::json jc;
        jc["pose_changes"] = c.pose_changes;
        jc["mode"] = (c.mode == RegMode::guided) ? "guided" : "plain-tv";
        jc["misregistered_reference"] = c.misregistered;
        jc["psnr_corrected_axial"] = q_corr.psnr_axial;
        jc["psnr_corrupted_axial"] = q_zf.psnr_axial;
        jc["psnr_corrected_volume"] = q_corr.psnr_volume;
        jc["psnr_corrupted_volume"] = q_zf.psnr_volume;
        jc["ssim_corrected_volume"] = q_corr.ssim_volume;
        jc["ssim_corrupted_volume"] = q_zf.ssim_volume;
        jc["trace_max_tau_err_mm"] = terr.max_tau_mm;
        jc["trace_max_phi_err_deg"] = terr.max_phi_rad * 180.0 / std::numbers::pi;
        jc["final_misfit"] = result.report.final_misfit;
        report["cases"][c.name] = std::move(jc);
        timings[c.name] = case_timer.seconds();
    }

    atomic_write_text(fs::path(a.out) / "bench_report.json", report.dump(2) + "\n");
    atomic_write_text(fs::path(a.out) / "timings.json", timings.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rgmc: joint rigid-motion estimation and reconstruction for 3D Cartesian MRI"};
    app.require_subcommand(1);

    PhantomArgs pa;
    CLI::App* phantom = app.add_subcommand("phantom", "Generate a multi-contrast phantom");
    phantom->add_option("--out", pa.out, "Output directory")->required();
    phantom->add_option("--preset", pa.preset, "Phantom preset (two-contrast-64)");
    phantom->add_option("--spec", pa.spec_path, "Phantom spec JSON (overrides preset)");
    phantom->add_option("--dims", pa.dims, "Grid dims nx,ny,nz");
    phantom->add_flag("--lesion", pa.lesion, "Add a target-only lesion blob");

    SimulateArgs sa;
    CLI::App* simulate = app.add_subcommand("simulate", "Simulate a motion-corrupted acquisition");
    simulate->add_option("--truth", sa.truth, "Ground-truth volume sidecar")->required();
    simulate->add_option("--out", sa.out, "Output directory")->required();
    simulate->add_option("--pattern", sa.pattern, "full | randomized | linear");
    simulate->add_option("--accel", sa.accel, "Acceleration factor");
    simulate->add_option("--seed", sa.seed, "Random seed");
    simulate->add_option("--poses", sa.pose_changes, "Number of pose changes");
    simulate->add_option("--max-trans-mm", sa.max_trans_mm, "Max |translation| per axis");
    simulate->add_option("--max-rot-deg", sa.max_rot_deg, "Max |rotation| per plane");
    simulate->add_option("--noise", sa.noise, "Complex noise sigma");
    simulate->add_option("--trace", sa.trace, "identity or a trace CSV path");
    simulate->add_option("--readout-axis", sa.readout, "x | y | z");

    CorrectArgs ca;
    CLI::App* correct = app.add_subcommand("correct", "Joint motion correction + reconstruction");
    correct->add_option("--data", ca.data, "KSpaceData sidecar")->required();
    correct->add_option("--pattern", ca.pattern, "Pattern JSON (default: from data sidecar)");
    correct->add_option("--reference", ca.reference, "Reference contrast volume");
    correct->add_option("--out", ca.out, "Output directory")->required();
    correct->add_option("--config", ca.config, "Solver config JSON");
    correct->add_option("--mode", ca.mode, "guided | plain-tv");
    correct->add_option("--iters", ca.iters, "Override iterations per stage");

    MetricsArgs ma;
    CLI::App* metrics = app.add_subcommand("metrics", "PSNR/SSIM between two volumes");
    metrics->add_option("--test", ma.test, "Volume under test")->required();
    metrics->add_option("--ref", ma.ref, "Reference volume")->required();
    metrics->add_option("--out", ma.out, "Report JSON path");
    metrics->add_option("--csv", ma.csv, "Append a CSV row to this file");
    metrics->add_option("--label", ma.label, "Row label for CSV output");

    BenchArgs ba;
    CLI::App* bench = app.add_subcommand("bench", "Run the benchmark matrix");
    bench->add_option("--out", ba.out, "Output directory")->required();
    bench->add_option("--profile", ba.profile, "full | quick");
    bench->add_option("--seed", ba.seed, "Base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (phantom->parsed()) return cmd_phantom(pa);
        if (simulate->parsed()) return cmd_simulate(sa);
        if (correct->parsed()) return cmd_correct(ca);
        if (metrics->parsed()) return cmd_metrics(ma);
        if (bench->parsed()) return cmd_bench(ba);
    } catch (const DivergenceError& e) {
        std::cerr << "rgmc: solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "rgmc: error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
