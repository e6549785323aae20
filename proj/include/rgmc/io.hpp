#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rgmc/forward_model.hpp"
#include "rgmc/geometry.hpp"
#include "rgmc/metrics.hpp"
#include "rgmc/optimizer.hpp"
#include "rgmc/simulation.hpp"
#include "rgmc/volume.hpp"

namespace rgmc {

inline constexpr const char* kToolVersion = "0.1.0";

// Volume file = little-endian binary payload (x-fastest) + JSON sidecar.
// `path` refers to the sidecar; the payload sits next to it as <stem>.bin.
// dtype is complex64 for complex data or float32 for magnitude images.
struct VolumeFileMeta {
    Shape3 dims{};
    Vec3 voxel_mm{};
    std::string dtype = "complex64";
    std::string kind = "image";  // image | kspace
};

void write_volume_file(const std::filesystem::path& sidecar_path, const ComplexVolume3D& vol,
                       const std::string& kind = "image", const std::string& dtype = "complex64");
ComplexVolume3D read_volume_file(const std::filesystem::path& sidecar_path,
                                 VolumeFileMeta* meta = nullptr);

// KSpaceData file: complex64 payload, row-major (t, r), sidecar carrying the
// pattern, noise level, and grid geometry.
void write_kspace_file(const std::filesystem::path& sidecar_path, const KSpaceData& data);
KSpaceData read_kspace_file(const std::filesystem::path& sidecar_path);

void write_pattern_json(const std::filesystem::path& path, const SamplingPattern& pattern);
SamplingPattern read_pattern_json(const std::filesystem::path& path);

// CSV trace with header t,tau_x_mm,tau_y_mm,tau_z_mm,phi_xy_deg,phi_xz_deg,phi_yz_deg.
void write_trace_csv(const std::filesystem::path& path, const MotionTrace& trace);
MotionTrace read_trace_csv(const std::filesystem::path& path);

SolverConfig read_solver_config(const std::filesystem::path& path);
void write_solver_config(const std::filesystem::path& path, const SolverConfig& cfg);

PhantomSpec read_phantom_spec(const std::filesystem::path& path);
void write_phantom_spec(const std::filesystem::path& path, const PhantomSpec& spec);

std::string report_to_json(const CorrectionReport& report, bool include_timings);
std::string quality_report_to_json(const QualityReport& rep);
std::string quality_report_csv_row(const QualityReport& rep, const std::string& label);

// Run manifest: config snapshot, seeds, referenced files, timings.
struct RunManifest {
    std::string command;
    std::string tool_version = kToolVersion;
    std::vector<std::pair<std::string, std::string>> inputs;
    std::vector<std::pair<std::string, std::string>> outputs;
    std::string config_json = "{}";
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
    std::vector<std::pair<std::string, double>> timings_s;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

// All text/binary writes go through a temp file plus rename.
void atomic_write_bytes(const std::filesystem::path& path, const void* data, std::size_t size);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

// 8-bit grayscale PNG of a magnitude slice, windowed to [0, p99.5].
void write_png_gray(const std::filesystem::path& path, const std::vector<double>& values,
                    int width, int height, double window_hi);
double percentile(std::vector<double> values, double p);

}  // namespace rgmc
