#include "uvmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "trainer_util.hpp"
#include "uvmap/checkpoint.hpp"
#include "uvmap/optim.hpp"

namespace uvmap {

using detail::kSnapshotEvery;
using detail::restore_snapshot;
using detail::Snapshot;
using detail::take_snapshot;

MultiChartForward multichart_forward(Tape& tape, MultiChartNetworkSet& nets, Var p) {
    MultiChartForward f;
    f.h = mlp_forward(tape, nets.embed, p);
    f.s = assign(tape, nets, f.h);
    f.q.reserve(nets.chart_count());
    f.cycle.reserve(nets.chart_count());
    for (auto& chart : nets.charts) {
        Var qk = mlp_forward(tape, chart.unwrap, f.h);
        f.q.push_back(qk);
        f.cycle.push_back(wrap_forward(tape, chart.wrap, qk));
    }
    return f;
}

ChartPartition extract_charts(const Matrix& s) {
    if (s.rows() == 0 || s.cols() == 0)
        throw ArgumentError("extract_charts: score matrix is empty");
    ChartPartition part;
    part.labels.resize(s.rows());
    part.members.resize(s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < s.cols(); ++j)
            if (s(i, j) > s(i, best)) best = j;  // ties keep the lowest index
        part.labels[i] = best;
        part.members[best].push_back(i);
    }
    return part;
}

namespace {

struct CellBox {
    std::size_t chart = 0;
    double w = 0.0, h = 0.0;       // cell extents (chart bbox / 0.98)
    double cx = 0.0, cy = 0.0;     // chart bbox center in its own UV frame
};

}  // namespace

AtlasLayout pack_atlas(const std::vector<Matrix>& chart_uv,
                       const ChartPartition& partition) {
    const std::size_t k_count = partition.members.size();
    if (chart_uv.size() != k_count)
        throw ArgumentError("pack_atlas: one UV map per chart required");
    const std::size_t v = partition.labels.size();

    // cells for non-empty charts; the chart occupies the centered 98% of its
    // cell, which keeps neighboring contents strictly apart
    std::vector<CellBox> cells;
    for (std::size_t k = 0; k < k_count; ++k) {
        const auto& members = partition.members[k];
        if (members.empty()) continue;
        const Matrix& uv = chart_uv[k];
        if (uv.rows() != v || uv.cols() != 2)
            throw ArgumentError("pack_atlas: chart maps must be V×2");
        double lo[2] = {uv(members[0], 0), uv(members[0], 1)};
        double hi[2] = {lo[0], lo[1]};
        for (std::size_t i : members)
            for (std::size_t c = 0; c < 2; ++c) {
                lo[c] = std::min(lo[c], uv(i, c));
                hi[c] = std::max(hi[c], uv(i, c));
            }
        CellBox box;
        box.chart = k;
        box.w = std::max(hi[0] - lo[0], 1e-6) / 0.98;
        box.h = std::max(hi[1] - lo[1], 1e-6) / 0.98;
        box.cx = 0.5 * (lo[0] + hi[0]);
        box.cy = 0.5 * (lo[1] + hi[1]);
        cells.push_back(box);
    }
    if (cells.empty()) throw ArgumentError("pack_atlas: no non-empty chart");

    std::stable_sort(cells.begin(), cells.end(), [](const CellBox& a, const CellBox& b) {
        if (a.h != b.h) return a.h > b.h;
        return a.chart < b.chart;
    });

    // candidate strip widths: prefix sums of the sorted cell widths; shelf-pack
    // each and keep the squarest layout, preferring width on ties
    std::vector<double> prefix(cells.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        acc += cells[i].w;
        prefix[i] = acc;
    }

    struct Layout {
        std::vector<std::pair<double, double>> origin;  // per sorted cell
        double w = 0.0, h = 0.0;
    };
    auto shelf_pack = [&](double strip_w) {
        Layout lay;
        lay.origin.resize(cells.size());
        double x = 0.0, y = 0.0, row_h = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (x > 0.0 && x + cells[i].w > strip_w + 1e-12) {
                y += row_h;
                x = 0.0;
                row_h = 0.0;
            }
            lay.origin[i] = {x, y};
            x += cells[i].w;
            row_h = std::max(row_h, cells[i].h);
            lay.w = std::max(lay.w, x);
        }
        lay.h = y + row_h;
        return lay;
    };

    Layout best = shelf_pack(prefix[0]);
    for (std::size_t c = 1; c < prefix.size(); ++c) {
        Layout cand = shelf_pack(prefix[c]);
        const double cand_side = std::max(cand.w, cand.h);
        const double best_side = std::max(best.w, best.h);
        if (cand_side < best_side || (cand_side == best_side && cand.w > best.w))
            best = cand;
    }

    AtlasLayout out;
    out.placements.assign(k_count, AtlasPlacement{});
    const double scale = 1.0 / std::max(best.w, best.h);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const CellBox& box = cells[i];
        const double cell_cx = best.origin[i].first + 0.5 * box.w;
        const double cell_cy = best.origin[i].second + 0.5 * box.h;
        AtlasPlacement& pl = out.placements[box.chart];
        pl.scale = scale;
        pl.tx = scale * (cell_cx - box.cx);
        pl.ty = scale * (cell_cy - box.cy);
    }

    out.uv = Matrix(v, 2);
    for (std::size_t i = 0; i < v; ++i) {
        const std::size_t k = partition.labels[i];
        const AtlasPlacement& pl = out.placements[k];
        out.uv(i, 0) = pl.scale * chart_uv[k](i, 0) + pl.tx;
        out.uv(i, 1) = pl.scale * chart_uv[k](i, 1) + pl.ty;
    }
    return out;
}

namespace {

void validate_config(const ChartRunConfig& cfg, std::size_t v) {
    if (cfg.k_charts < 1) throw ArgumentError("train_multichart: K must be ≥ 1");
    if (cfg.k_charts > v)
        throw ArgumentError("train_multichart: K exceeds the vertex count");
    if (cfg.iterations < 1)
        throw ArgumentError("train_multichart: iterations must be ≥ 1");
    if (cfg.eps_coef <= 0.0)
        throw ArgumentError("train_multichart: ε coefficient must be positive");
    if (cfg.lr <= 0.0 || cfg.lr_min <= 0.0 || cfg.lr_min > cfg.lr)
        throw ArgumentError("train_multichart: need 0 < lr_min ≤ lr");
    if (cfg.j_u == 0)
        throw ArgumentError("train_multichart: J_u must be ≥ 1");
}

std::size_t count_nonempty(const Matrix& s) {
    ChartPartition part = extract_charts(s);
    std::size_t n = 0;
    for (const auto& m : part.members)
        if (!m.empty()) ++n;
    return n;
}

}  // namespace

ChartResult train_multichart(const SurfaceMesh& mesh, const ChartRunConfig& cfg) {
    const std::size_t v = mesh.vertex_count();
    if (v < 4) throw ArgumentError("train_multichart: need at least 4 vertices");
    validate_config(cfg, v);
    const std::size_t k_count = cfg.k_charts;

    const auto t_start = std::chrono::steady_clock::now();

    Rng rng(cfg.seed);
    MultiChartNetworkSet nets = MultiChartNetworkSet::create(k_count, rng);
    std::vector<ParamTensor*> params = nets.parameters();
    Adam adam(params);

    const std::size_t j_u = std::min(cfg.j_u, v - 1);
    const std::size_t mark_90 = std::max<std::size_t>(1, cfg.iterations * 9 / 10);

    auto write_checkpoint = [&] {
        if (cfg.checkpoint_dir.empty()) return;
        std::vector<const ParamTensor*> view(params.begin(), params.end());
        save_checkpoint(cfg.checkpoint_dir + "/checkpoint.bin", view);
    };

    Snapshot snapshot = take_snapshot(params, adam);
    double ref_loss = std::numeric_limits<double>::infinity();
    double lr_scale = 1.0;
    ChartProgressInfo last;
    std::size_t nonempty_at_90 = k_count;

    try {
        for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
            const double lr =
                cosine_lr(cfg.lr, cfg.lr_min, iter, cfg.iterations) * lr_scale;

            Tape tape;
            Var p = tape.constant(mesh.vertices);
            Var n = tape.constant(mesh.normals);
            MultiChartForward f = multichart_forward(tape, nets, p);

            Var total;
            double hinge_sum = 0.0, cyc_pos_sum = 0.0, cyc_norm_sum = 0.0,
                   tri_sum = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                const Matrix& qk = tape.val(f.q[k]);
                const DynamicThresholds thr =
                    compute_thresholds(qk, cfg.eps_coef, 0.02);
                if (!(thr.eps > 0.0))
                    throw NumericError("train_multichart: chart UV collapsed (ε ≤ 0)");
                NeighborTable nb = knn(qk, qk, j_u);

                Var sk = tape.slice_cols(f.s, k, k + 1);
                ChartTerms terms =
                    chart_losses(tape, sk, f.q[k], p, f.cycle[k].p, n, f.cycle[k].n,
                                 mesh, nb, thr.eps, cfg.weights);
                total = total.valid() ? tape.add(total, terms.total) : terms.total;
                hinge_sum += tape.scalar(terms.hinge);
                cyc_pos_sum += tape.scalar(terms.cycle_position);
                cyc_norm_sum += tape.scalar(terms.cycle_normal);
                tri_sum += tape.scalar(terms.tdl);
            }
            const double loss_val = tape.scalar(total);

            if (loss_val > 10.0 * ref_loss) {
                restore_snapshot(snapshot, params, adam);
                lr_scale *= 0.5;
                continue;
            }

            tape.backward(total);
            adam.step(lr);

            if (iter + 1 == kSnapshotEvery) ref_loss = loss_val;
            if ((iter + 1) % kSnapshotEvery == 0) snapshot = take_snapshot(params, adam);
            if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
                write_checkpoint();
            if (iter + 1 == mark_90) nonempty_at_90 = count_nonempty(tape.val(f.s));

            last = ChartProgressInfo{iter + 1,
                                     cfg.iterations,
                                     lr,
                                     hinge_sum,
                                     cyc_pos_sum,
                                     cyc_norm_sum,
                                     tri_sum,
                                     loss_val,
                                     count_nonempty(tape.val(f.s))};
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

    // inference: final scores and chart maps
    ChartResult result;
    {
        Tape tape;
        MultiChartForward f =
            multichart_forward(tape, nets, tape.constant(mesh.vertices));
        result.partition = extract_charts(tape.val(f.s));
        result.chart_uv.reserve(k_count);
        for (std::size_t k = 0; k < k_count; ++k)
            result.chart_uv.push_back(tape.val(f.q[k]));
    }
    result.atlas = pack_atlas(result.chart_uv, result.partition);
    result.charts_nonempty_at_90pct = nonempty_at_90;
    result.charts_nonempty_final = 0;
    for (const auto& m : result.partition.members)
        if (!m.empty()) ++result.charts_nonempty_final;

    result.report = evaluate(mesh, result.atlas.uv, result.partition.labels, {});
    result.per_chart = per_chart_metrics(mesh, result.atlas.uv, result.partition.labels);
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

}  // namespace uvmap
