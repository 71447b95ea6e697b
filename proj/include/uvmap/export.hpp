#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uvmap/geometry.hpp"
#include "uvmap/losses.hpp"
#include "uvmap/pipeline.hpp"

namespace uvmap {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Artifact writers. All numeric text uses formats that round-trip doubles
// exactly, so re-reading an export reproduces the run's numbers bit for bit.
// ---------------------------------------------------------------------------

// OBJ with one vt per vertex and `f v/vt` faces (indices coincide). With no
// faces (point clouds) the vt records still align with the v records by order.
void write_uv_obj(const std::string& path, const Matrix& vertices, const Matrix& uv,
                  const std::vector<std::array<std::size_t, 3>>& faces);

void write_seams_json(const std::string& path, const SeamSet& seams);

// Report JSON with the fixed key set {charts, conformal, equiareal, faces,
// flipped, isometric, iterations, seam_length, seed, vertices, wall_seconds};
// absent metrics serialize as null. `per_chart` appends chart-wise metrics.
void write_report_json(const std::string& path, const DistortionReport& rep,
                       const std::vector<ChartMetrics>* per_chart = nullptr);

// Run metadata carried from an existing report so re-evaluation reproduces
// the exported file byte for byte.
struct ReportMeta {
    std::int64_t iterations = 0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};
std::optional<ReportMeta> read_report_meta(const std::string& path);

// Sidecar with per-vertex chart labels and per-face chart ids (corner
// majority, three-way ties to the lowest label).
void write_charts_json(const std::string& path, const ChartPartition& partition,
                       const std::vector<std::array<std::size_t, 3>>& faces);
std::optional<std::vector<std::size_t>> read_chart_labels(const std::string& path,
                                                          std::size_t vertex_count);

// UV layout as SVG 1.1: triangles as polygons (or dots for point clouds),
// seam vertices highlighted.
void write_uv_svg(const std::string& path, const Matrix& uv,
                  const std::vector<std::array<std::size_t, 3>>& faces,
                  const std::vector<std::size_t>& seam_vertices);

// Atlas SVG with one color per chart.
void write_atlas_svg(const std::string& path, const Matrix& uv,
                     const std::vector<std::array<std::size_t, 3>>& faces,
                     const std::vector<std::size_t>& labels, std::size_t k_count);

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

std::string fnv1a64_file(const std::string& path);

// Everything needed to replay a run: resolved configuration, input identity,
// and the artifact list. Round-trips losslessly through its JSON form.
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string mode;  // "global" | "multichart" | "pointcloud"
    std::string input_path;
    std::string input_hash;  // FNV-1a 64 of the input bytes, hex
    std::uint64_t seed = 0;
    std::size_t iterations = 20000;
    double lr = 1e-3;
    double lr_min = 1e-5;
    std::size_t k_charts = 8;
    std::size_t j_u = 5;
    std::size_t j_cut = 3;
    double tau_coef = 0.02;
    double eps_coef = 0.2;
    std::vector<double> weights;  // 5 global terms or 3 chart terms
    std::size_t refresh_every = 10;
    std::size_t progress_every = 100;
    std::size_t checkpoint_every = 0;
    bool seam_mesh_neighbors = false;
    int threads = 1;
    std::vector<std::string> artifacts;  // basenames inside the output directory
    double wall_seconds = 0.0;
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

}  // namespace uvmap
