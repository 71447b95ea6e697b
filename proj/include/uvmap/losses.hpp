#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "uvmap/geometry.hpp"
#include "uvmap/networks.hpp"
#include "uvmap/tape.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// Loss weights and dynamic thresholds
// ---------------------------------------------------------------------------

struct GlobalLossWeights {
    double alpha_u = 0.01;    // unwrapping hinge
    double alpha_w = 1.0;     // wrapping (Chamfer)
    double alpha_c = 0.01;    // cycle consistency
    double alpha_diff = 0.01; // differential distortion
    double alpha_tri = 0.001; // triangle distortion
};

struct ChartLossWeights {
    double alpha_u = 0.01;
    double alpha_c = 10.0;
    double alpha_tri = 1.0;
};

// L = longest side of the live UV bounding box; ε and τ are recomputed from
// it every iteration and enter the losses as plain constants.
struct DynamicThresholds {
    double length_scale = 0.0;  // L
    double eps = 0.0;           // eps_coef · L / √V
    double tau = 0.0;           // tau_coef · L
};
DynamicThresholds compute_thresholds(const Matrix& q, double eps_coef = 0.2,
                                     double tau_coef = 0.02);

// ---------------------------------------------------------------------------
// Differentiable loss terms
// ---------------------------------------------------------------------------

// Σᵢ Σⱼ max(0, ε − ‖qᵢ − q_{i,j}‖). With `scores` (V×1) each pair is weighted
// by min(sᵢ, sⱼ); without, weights are 1 and the summation order is identical.
Var unwrapping_loss(Tape& tape, Var q, const NeighborTable& nb, double eps,
                    Var scores = {});

// Symmetric sum of means of squared nearest-neighbor distances.
Var chamfer(Tape& tape, Var a, Var b);

// Mean row-L1 distance between two row-aligned matrices, optionally
// score-weighted per row: (1/R) Σ sᵢ·‖aᵢ − bᵢ‖₁.
Var mean_row_l1(Tape& tape, Var a, Var b, Var scores = {});

// (1/R) Σ sᵢ·(1 − cos(n₁ᵢ, n₂ᵢ)) for unit rows.
Var mean_one_minus_cos(Tape& tape, Var n1, Var n2, Var scores = {});

// Position + (2D cycle) + normal terms; the normal term is skipped when
// with_normals is false (point-cloud mode).
struct CycleTerms {
    Var position;  // mean L1 of p − p_cycle
    Var uv;        // mean L1 of q̂ − q̂_cycle
    Var normal;    // mean (1 − cos); constant 0 when normals are off
    Var total;
};
CycleTerms cycle_consistency_terms(Tape& tape, Var p, Var p_cycle, Var qhat,
                                   Var qhat_cycle, Var n, Var n_cycle,
                                   bool with_normals = true);
Var cycle_consistency_loss(Tape& tape, Var p, Var p_cycle, Var qhat, Var qhat_cycle,
                           Var n, Var n_cycle, bool with_normals = true);

// Σ rows |λ₁ − λ₂| of JᵀJ where the Jacobian columns are the two tangent
// outputs (R×3 each). No normalization.
Var singular_gap_sum(Tape& tape, Var t1_p, Var t2_p);

// Eq.-style form: runs the wrap Jacobians at every row of q and q̂ and
// normalizes the summed gaps by the row count of q.
Var differential_distortion_loss(Tape& tape, WrapNet& net, Var q, Var qhat);

enum class TdlMode { kConformal, kIsometric };
// Conformal: (1/3T) Σ_t Σ_corner |θ − β|, UV angles vs 3D angles, with
// degenerate UV corners pinned to acos(−1+1e-12). Isometric: (1/3T) Σ over
// triangle edges of s(e)·(‖Δp‖ − ‖Δq‖)², edge score = mean of endpoint
// scores (1 when `scores` is absent).
Var triangle_distortion_loss(Tape& tape, const SurfaceMesh& mesh, Var q, TdlMode mode,
                             Var scores = {});

// α_u·ℓ_u + α_w·ℓ_w + α_c·ℓ_c + α_diff·ℓ_diff + α_tri·ℓ_tri
Var global_loss(Tape& tape, Var l_u, Var l_w, Var l_c, Var l_diff, Var l_tri,
                const GlobalLossWeights& w);
double global_loss(double l_u, double l_w, double l_c, double l_diff, double l_tri,
                   const GlobalLossWeights& w);

// Per-chart score-weighted composite: α_u·hinge + α_c·(position + normal) +
// α_tri·isometric TDL. With s ≡ 1 each term equals its unweighted single-
// chart counterpart exactly.
struct ChartTerms {
    Var hinge, cycle_position, cycle_normal, tdl;
    Var total;
};
ChartTerms chart_losses(Tape& tape, Var s_k, Var q_k, Var p, Var p_cycle, Var n,
                        Var n_cycle, const SurfaceMesh& mesh, const NeighborTable& nb,
                        double eps_k, const ChartLossWeights& w);

// ---------------------------------------------------------------------------
// Evaluation metrics
// ---------------------------------------------------------------------------

struct DistortionReport {
    std::optional<double> conformal;   // mean |θ−β| over 3T angles, radians
    std::optional<double> equiareal;   // mean squared normalized-area difference
    std::optional<double> isometric;   // mean (‖e₃D‖ − c·‖e_UV‖)², c least squares
    std::optional<std::int64_t> flipped;  // signed-area minority count per chart
    std::int64_t charts = 0;
    std::optional<double> seam_length; // 3D length: label crossings + seam edges
    std::int64_t vertices = 0;
    std::int64_t faces = 0;
    std::int64_t iterations = 0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

// Mesh metrics over a complete per-vertex UV assignment. `labels` is the
// per-vertex chart id (all zeros for a single chart); `seam_vertices` marks
// extraction-flagged vertices whose induced edges count into seam_length.
// Per-chart metrics consider only triangles with all corners in one chart.
DistortionReport evaluate(const SurfaceMesh& mesh, const Matrix& uv,
                          const std::vector<std::size_t>& labels,
                          const std::vector<std::size_t>& seam_vertices);

// Per-chart conformal / flipped breakdown used by the multi-chart pipeline.
struct ChartMetrics {
    std::size_t chart = 0;
    std::size_t vertices = 0;
    std::size_t triangles = 0;  // label-uniform triangles
    double conformal = 0.0;
    std::int64_t flipped = 0;
};
std::vector<ChartMetrics> per_chart_metrics(const SurfaceMesh& mesh, const Matrix& uv,
                                            const std::vector<std::size_t>& labels);

// Point-cloud variant: isometric metric over the k-NN graph (k = 6), other
// mesh metrics absent.
DistortionReport evaluate_pointcloud(const Matrix& points, const Matrix& uv);

}  // namespace uvmap
