#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uvmap/geometry.hpp"
#include "uvmap/losses.hpp"
#include "uvmap/networks.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// Global (single-chart) trainer
// ---------------------------------------------------------------------------

// Per-term loss snapshot handed to the progress observer; a plain copy, so
// the observer never sees torn state.
struct ProgressInfo {
    std::size_t iteration = 0;  // 1-based
    std::size_t total = 0;
    double lr = 0.0;
    double eps = 0.0;
    double tau = 0.0;
    double loss_unwrap = 0.0;
    double loss_wrap = 0.0;
    double loss_cycle = 0.0;
    double cycle_position = 0.0;
    double cycle_uv = 0.0;
    double cycle_normal = 0.0;
    double loss_diff = 0.0;
    double loss_tri = 0.0;
    double loss_total = 0.0;  // weighted composition
};

struct GlobalRunConfig {
    std::size_t iterations = 20000;
    std::uint64_t seed = 0;
    double lr = 1e-3;      // cosine-decayed …
    double lr_min = 1e-5;  // … down to this
    std::size_t j_u = 5;    // UV-space repulsion neighbors
    std::size_t j_cut = 3;  // 3D neighbors for seam detection
    double eps_coef = 0.2;
    double tau_coef = 0.02;
    GlobalLossWeights weights;
    bool point_cloud_mode = false;      // drops the normal and TDL terms
    std::size_t refresh_every = 10;     // k-NN table rebuild period
    std::size_t progress_every = 100;   // 0 = final report only
    std::size_t checkpoint_every = 0;   // 0 = only on completion/failure
    std::string checkpoint_dir;         // empty = no checkpoint files
    bool seam_mesh_neighbors = false;   // seams over one-ring instead of 3D k-NN
    std::function<void(const ProgressInfo&)> on_progress;
};

struct SeamPoint {
    std::size_t vertex = 0;
    double eta = 0.0;  // max UV gap over the point's 3D neighbors
};

struct SeamSet {
    std::vector<SeamPoint> points;  // ascending vertex index
    double tau = 0.0;
};

struct UVResult {
    Matrix uv;  // V×2, row i ↔ input vertex i
    SeamSet seams;
    DistortionReport report;
    GlobalNetworkSet nets;
    std::size_t iterations_run = 0;
    ProgressInfo final_losses;
};

// One full dual-branch forward pass on the tape. Branch A lifts the lattice
// G into 3D and back; branch B flattens the input points and re-lifts them.
// The two wrap evaluations run as one stacked pass (A rows first), which also
// produces the axis tangents for the differential term.
struct GlobalForward {
    Var qhat;        // A: deform(G)            V×2
    Var p_hat;       // A: wrap position        V×3
    Var n_hat;       // A: wrap normal          V×3
    Var qhat_cycle;  // A: unwrap(cut(p_hat))   V×2
    Var q;           // B: unwrap(cut(P))       V×2 — the output UV
    Var p_cycle;     // B: wrap position        V×3
    Var n_cycle;     // B: wrap normal          V×3
    Var t1, t2;      // stacked wrap tangents   2V×3 (A rows then B rows)
};
GlobalForward global_forward(Tape& tape, GlobalNetworkSet& nets, Var g, Var p);

UVResult train_global(const SurfaceMesh& mesh, const GlobalRunConfig& cfg);
UVResult train_global(const PointSet& points, const GlobalRunConfig& cfg);

// η_i = max UV distance from q_i to the UV images of i's J_cut nearest 3D
// neighbors; i is a seam point iff η_i > τ.
SeamSet extract_seams(const Matrix& p, const Matrix& q, double tau,
                      std::size_t j_cut);
// Same rule with mesh one-ring neighborhoods instead of 3D k-NN.
SeamSet extract_seams_mesh(const SurfaceMesh& mesh, const Matrix& q, double tau);

// ---------------------------------------------------------------------------
// Multi-chart trainer
// ---------------------------------------------------------------------------

struct ChartProgressInfo {
    std::size_t iteration = 0;  // 1-based
    std::size_t total = 0;
    double lr = 0.0;
    double loss_hinge = 0.0;     // Σ_k, weighted
    double loss_cycle_position = 0.0;
    double loss_cycle_normal = 0.0;
    double loss_tri = 0.0;
    double loss_total = 0.0;
    std::size_t charts_nonempty = 0;
};

struct ChartRunConfig {
    std::size_t k_charts = 8;
    std::size_t iterations = 20000;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double lr_min = 1e-5;
    std::size_t j_u = 5;
    double eps_coef = 0.2;
    ChartLossWeights weights;
    std::size_t progress_every = 100;
    std::size_t checkpoint_every = 0;
    std::string checkpoint_dir;
    std::function<void(const ChartProgressInfo&)> on_progress;
};

struct ChartPartition {
    std::vector<std::size_t> labels;                // V, argmax rows of S
    std::vector<std::vector<std::size_t>> members;  // K vertex-id lists
};

// Row argmax with ties to the lowest chart index.
ChartPartition extract_charts(const Matrix& s);

// uv_atlas = scale·uv + (tx, ty), one similarity per chart.
struct AtlasPlacement {
    double scale = 1.0;
    double tx = 0.0, ty = 0.0;
};

struct AtlasLayout {
    Matrix uv;  // V×2 in [0,1]², each vertex from its own chart's map
    std::vector<AtlasPlacement> placements;  // per chart; identity for empty
};

// Shelf layout: charts sorted by descending bbox height, cells padded 2%,
// one global scale so relative chart sizes survive.
AtlasLayout pack_atlas(const std::vector<Matrix>& chart_uv,
                       const ChartPartition& partition);

struct ChartResult {
    ChartPartition partition;
    std::vector<Matrix> chart_uv;  // K full maps, V×2 each
    AtlasLayout atlas;
    DistortionReport report;
    std::vector<ChartMetrics> per_chart;
    MultiChartNetworkSet nets;
    std::size_t iterations_run = 0;
    std::size_t charts_nonempty_at_90pct = 0;
    std::size_t charts_nonempty_final = 0;
    ChartProgressInfo final_losses;
};

// Shared-embedding forward: H = embed(P), S = assign(H), then per chart
// Q^(k) = unwrap_k(H) and (P_cycle^(k), N_cycle^(k)) = wrap_k(Q^(k)).
struct MultiChartForward {
    Var h;                     // V×512
    Var s;                     // V×K, row-stochastic
    std::vector<Var> q;        // K × (V×2)
    std::vector<WrapOut> cycle;  // K × (V×3 position, V×3 normal)
};
MultiChartForward multichart_forward(Tape& tape, MultiChartNetworkSet& nets, Var p);

ChartResult train_multichart(const SurfaceMesh& mesh, const ChartRunConfig& cfg);

}  // namespace uvmap
