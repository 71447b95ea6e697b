#include "uvmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "trainer_util.hpp"
#include "uvmap/checkpoint.hpp"
#include "uvmap/optim.hpp"

namespace uvmap {

using detail::kSnapshotEvery;
using detail::restore_snapshot;
using detail::Snapshot;
using detail::take_snapshot;

GlobalForward global_forward(Tape& tape, GlobalNetworkSet& nets, Var g, Var p) {
    const std::size_t v = tape.val(p).rows();
    if (tape.val(g).rows() != v)
        throw ArgumentError("global_forward: G and P must be row-aligned");

    GlobalForward f;
    f.qhat = deform(tape, nets, g);
    f.q = unwrap(tape, nets, cut(tape, nets, p));

    // one stacked wrap evaluation serves branch A, branch B's cycle, and the
    // tangents of the differential term
    WrapJvpOut w = wrap_forward_jvp(tape, nets.wrap, tape.concat_rows(f.qhat, f.q));
    f.p_hat = tape.slice_rows(w.p, 0, v);
    f.n_hat = tape.slice_rows(w.n, 0, v);
    f.p_cycle = tape.slice_rows(w.p, v, 2 * v);
    f.n_cycle = tape.slice_rows(w.n, v, 2 * v);
    f.t1 = w.t1_p;
    f.t2 = w.t2_p;

    f.qhat_cycle = unwrap(tape, nets, cut(tape, nets, f.p_hat));
    return f;
}

SeamSet extract_seams(const Matrix& p, const Matrix& q, double tau,
                      std::size_t j_cut) {
    if (p.rows() != q.rows())
        throw ArgumentError("extract_seams: p and q must be row-aligned");
    if (j_cut == 0 || j_cut >= p.rows())
        throw ArgumentError("extract_seams: need 0 < J_cut < V");

    NeighborTable nb = knn(p, p, j_cut);
    SeamSet out;
    out.tau = tau;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double eta = 0.0;
        for (std::size_t j : nb.neighbors[i])
            eta = std::max(eta, edge_len_2d(q, i, j));
        if (eta > tau) out.points.push_back({i, eta});
    }
    return out;
}

SeamSet extract_seams_mesh(const SurfaceMesh& mesh, const Matrix& q, double tau) {
    if (mesh.vertex_count() != q.rows())
        throw ArgumentError("extract_seams_mesh: mesh and q must be row-aligned");
    const auto ring = one_ring(mesh.vertex_count(), mesh.faces);
    SeamSet out;
    out.tau = tau;
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double eta = 0.0;
        for (std::size_t j : ring[i]) eta = std::max(eta, edge_len_2d(q, i, j));
        if (eta > tau) out.points.push_back({i, eta});
    }
    return out;
}

namespace {

void validate_config(const GlobalRunConfig& cfg) {
    if (cfg.iterations < 1)
        throw ArgumentError("train_global: iterations must be ≥ 1");
    if (cfg.eps_coef <= 0.0 || cfg.tau_coef <= 0.0)
        throw ArgumentError("train_global: threshold coefficients must be positive");
    if (cfg.lr <= 0.0 || cfg.lr_min <= 0.0 || cfg.lr_min > cfg.lr)
        throw ArgumentError("train_global: need 0 < lr_min ≤ lr");
    if (cfg.j_u == 0 || cfg.j_cut == 0)
        throw ArgumentError("train_global: neighbor counts must be ≥ 1");
    if (cfg.refresh_every == 0)
        throw ArgumentError("train_global: refresh period must be ≥ 1");
}

UVResult train_global_impl(const Matrix& points, const Matrix& normals,
                           const SurfaceMesh* mesh, const GlobalRunConfig& cfg) {
    validate_config(cfg);
    const std::size_t v = points.rows();
    if (v < 4) throw ArgumentError("train_global: need at least 4 points");
    const bool with_normals = !cfg.point_cloud_mode;
    const bool with_tdl = mesh != nullptr && !cfg.point_cloud_mode;

    const auto t_start = std::chrono::steady_clock::now();

    Rng rng(cfg.seed);
    GlobalNetworkSet nets = GlobalNetworkSet::create(rng);
    std::vector<ParamTensor*> params = nets.parameters();
    Adam adam(params);

    const Matrix grid = sample_grid(v);
    const std::size_t j_u = std::min(cfg.j_u, v - 1);
    const std::size_t j_cut = std::min(cfg.j_cut, v - 1);

    auto write_checkpoint = [&] {
        if (cfg.checkpoint_dir.empty()) return;
        std::vector<const ParamTensor*> view(params.begin(), params.end());
        save_checkpoint(cfg.checkpoint_dir + "/checkpoint.bin", view);
    };

    NeighborTable nb_uv;
    bool stale_table = true;
    Snapshot snapshot = take_snapshot(params, adam);
    double ref_loss = std::numeric_limits<double>::infinity();
    double lr_scale = 1.0;
    ProgressInfo last;

    try {
        for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
            const double lr =
                cosine_lr(cfg.lr, cfg.lr_min, iter, cfg.iterations) * lr_scale;

            Tape tape;
            Var p = tape.constant(points);
            Var g = tape.constant(grid);
            GlobalForward f = global_forward(tape, nets, g, p);

            const DynamicThresholds thr =
                compute_thresholds(tape.val(f.q), cfg.eps_coef, cfg.tau_coef);
            if (!(thr.eps > 0.0))
                throw NumericError("train_global: UV bounding box collapsed (ε ≤ 0)");

            if (stale_table || iter % cfg.refresh_every == 0) {
                nb_uv = knn(tape.val(f.q), tape.val(f.q), j_u);
                stale_table = false;
            }

            Var l_u = unwrapping_loss(tape, f.q, nb_uv, thr.eps);
            Var l_w = chamfer(tape, f.p_hat, p);
            Var n_in = with_normals ? tape.constant(normals) : Var{};
            CycleTerms cyc = cycle_consistency_terms(
                tape, p, f.p_cycle, f.qhat, f.qhat_cycle, n_in, f.n_cycle, with_normals);
            Var l_diff = tape.scale(singular_gap_sum(tape, f.t1, f.t2),
                                    1.0 / static_cast<double>(v));
            Var l_tri = with_tdl ? triangle_distortion_loss(tape, *mesh, f.q,
                                                            TdlMode::kConformal)
                                 : tape.constant(Matrix(1, 1, 0.0));
            Var total =
                global_loss(tape, l_u, l_w, cyc.total, l_diff, l_tri, cfg.weights);
            const double loss_val = tape.scalar(total);

            // divergence guard: reference is the loss at iteration 100
            if (loss_val > 10.0 * ref_loss) {
                restore_snapshot(snapshot, params, adam);
                lr_scale *= 0.5;
                stale_table = true;
                continue;
            }

            tape.backward(total);
            adam.step(lr);

            if (iter + 1 == kSnapshotEvery) ref_loss = loss_val;
            if ((iter + 1) % kSnapshotEvery == 0) snapshot = take_snapshot(params, adam);
            if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
                write_checkpoint();

            last = ProgressInfo{iter + 1,
                                cfg.iterations,
                                lr,
                                thr.eps,
                                thr.tau,
                                tape.scalar(l_u),
                                tape.scalar(l_w),
                                tape.scalar(cyc.total),
                                tape.scalar(cyc.position),
                                tape.scalar(cyc.uv),
                                tape.scalar(cyc.normal),
                                tape.scalar(l_diff),
                                tape.scalar(l_tri),
                                loss_val};
            if (cfg.on_progress &&
                ((cfg.progress_every > 0 && (iter + 1) % cfg.progress_every == 0) ||
                 iter + 1 == cfg.iterations))
                cfg.on_progress(last);
        }
    } catch (const NumericError&) {
        restore_snapshot(snapshot, params, adam);
        write_checkpoint();
        throw;
    }

    // inference with the trained weights: branch B only
    UVResult result;
    {
        Tape tape;
        Var q = unwrap(tape, nets, cut(tape, nets, tape.constant(points)));
        result.uv = tape.val(q);
    }
    const DynamicThresholds thr =
        compute_thresholds(result.uv, cfg.eps_coef, cfg.tau_coef);
    result.seams = (cfg.seam_mesh_neighbors && mesh != nullptr)
                       ? extract_seams_mesh(*mesh, result.uv, thr.tau)
                       : extract_seams(points, result.uv, thr.tau, j_cut);

    if (mesh != nullptr) {
        std::vector<std::size_t> labels(v, 0);
        std::vector<std::size_t> seam_ids;
        seam_ids.reserve(result.seams.points.size());
        for (const auto& sp : result.seams.points) seam_ids.push_back(sp.vertex);
        result.report = evaluate(*mesh, result.uv, labels, seam_ids);
    } else {
        result.report = evaluate_pointcloud(points, result.uv);
    }
    result.report.iterations = static_cast<std::int64_t>(cfg.iterations);
    result.report.seed = cfg.seed;
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();

    write_checkpoint();
    result.nets = std::move(nets);
    result.iterations_run = cfg.iterations;
    result.final_losses = last;
    return result;
}

}  // namespace

UVResult train_global(const SurfaceMesh& mesh, const GlobalRunConfig& cfg) {
    return train_global_impl(mesh.vertices, mesh.normals, &mesh, cfg);
}

UVResult train_global(const PointSet& points, const GlobalRunConfig& cfg) {
    GlobalRunConfig forced = cfg;
    forced.point_cloud_mode = true;
    return train_global_impl(points.points, points.normals, nullptr, forced);
}

}  // namespace uvmap
