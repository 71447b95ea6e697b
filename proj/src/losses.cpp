#include "uvmap/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace uvmap {
namespace {

constexpr double kDegenerateEdge = 1e-12;
constexpr double kAcosGuard = 1e-12;

Var require_scalar(Tape& tape, Var v, const char* what) {
    const Matrix& m = tape.val(v);
    if (m.rows() != 1 || m.cols() != 1)
        throw ArgumentError(std::string(what) + ": expected a scalar term");
    return v;
}

// corner angle between (b−a) and (c−a), with the same clamping rule the
// differentiable path uses
double corner_angle(const double* a, const double* b, const double* c,
                    std::size_t dim) {
    double n1 = 0.0, n2 = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double e1 = b[i] - a[i];
        const double e2 = c[i] - a[i];
        n1 += e1 * e1;
        n2 += e2 * e2;
        dot += e1 * e2;
    }
    n1 = std::sqrt(n1);
    n2 = std::sqrt(n2);
    double cosv;
    if (n1 < kDegenerateEdge || n2 < kDegenerateEdge)
        cosv = -1.0 + kAcosGuard;
    else
        cosv = dot / (n1 * n2);
    cosv = std::min(1.0 - kAcosGuard, std::max(-1.0 + kAcosGuard, cosv));
    return std::acos(cosv);
}

}  // namespace

// ---------------------------------------------------------------------------
// thresholds
// ---------------------------------------------------------------------------

DynamicThresholds compute_thresholds(const Matrix& q, double eps_coef, double tau_coef) {
    if (q.rows() == 0) throw ArgumentError("compute_thresholds: empty UV set");
    if (eps_coef <= 0.0 || tau_coef <= 0.0)
        throw ArgumentError("compute_thresholds: coefficients must be positive");
    double lo[2] = {q(0, 0), q(0, 1)};
    double hi[2] = {q(0, 0), q(0, 1)};
    for (std::size_t r = 1; r < q.rows(); ++r)
        for (std::size_t c = 0; c < 2; ++c) {
            lo[c] = std::min(lo[c], q(r, c));
            hi[c] = std::max(hi[c], q(r, c));
        }
    DynamicThresholds t;
    t.length_scale = std::max(hi[0] - lo[0], hi[1] - lo[1]);
    t.eps = eps_coef * t.length_scale / std::sqrt(static_cast<double>(q.rows()));
    t.tau = tau_coef * t.length_scale;
    return t;
}

// ---------------------------------------------------------------------------
// differentiable terms
// ---------------------------------------------------------------------------

Var unwrapping_loss(Tape& tape, Var q, const NeighborTable& nb, double eps,
                    Var scores) {
    if (eps <= 0.0) throw ArgumentError("unwrapping_loss: ε must be positive");
    const Matrix& qv = tape.val(q);
    if (nb.neighbors.size() != qv.rows())
        throw ArgumentError("unwrapping_loss: neighbor table does not match q");
    if (scores.valid() &&
        (tape.val(scores).rows() != qv.rows() || tape.val(scores).cols() != 1))
        throw ArgumentError("unwrapping_loss: scores must be V×1");

    Var acc;
    for (std::size_t j = 0; j < nb.k; ++j) {
        std::vector<std::size_t> idx(qv.rows());
        for (std::size_t i = 0; i < qv.rows(); ++i) {
            if (nb.neighbors[i].size() != nb.k)
                throw ArgumentError("unwrapping_loss: ragged neighbor table");
            idx[i] = nb.neighbors[i][j];
        }
        Var diff = tape.sub(q, tape.gather_rows(q, idx));
        Var dist = tape.sqrt0(tape.row_sum(tape.square(diff)));
        Var hinge = tape.leaky_relu(tape.shift(tape.scale(dist, -1.0), eps), 0.0);
        if (scores.valid()) {
            Var sj = tape.gather_rows(scores, idx);
            Var mn = tape.scale(
                tape.sub(tape.add(scores, sj), tape.abs(tape.sub(scores, sj))), 0.5);
            hinge = tape.mul(hinge, mn);
        }
        Var total_j = tape.sum(hinge);
        acc = acc.valid() ? tape.add(acc, total_j) : total_j;
    }
    if (!acc.valid()) throw ArgumentError("unwrapping_loss: neighbor table has k = 0");
    return acc;
}

namespace {

std::vector<std::size_t> nearest_in(const Matrix& query, const Matrix& data) {
    std::vector<std::size_t> idx(query.rows(), 0);
    if (data.rows() > 1) {
        NeighborTable nb = knn(query, data, 1);
        for (std::size_t i = 0; i < query.rows(); ++i) idx[i] = nb.neighbors[i][0];
    }
    return idx;
}

}  // namespace

Var chamfer(Tape& tape, Var a, Var b) {
    const Matrix& av = tape.val(a);
    if (av.rows() == 0 || tape.val(b).rows() == 0)
        throw ArgumentError("chamfer: point sets must be non-empty");
    // copy so identical handles do not trigger the k-NN self-exclusion rule
    const Matrix bv = tape.val(b);
    Var ab = tape.sum(tape.row_sum(
        tape.square(tape.sub(a, tape.gather_rows(b, nearest_in(av, bv))))));
    Var ba = tape.sum(tape.row_sum(
        tape.square(tape.sub(b, tape.gather_rows(a, nearest_in(bv, av))))));
    return tape.add(tape.scale(ab, 1.0 / static_cast<double>(av.rows())),
                    tape.scale(ba, 1.0 / static_cast<double>(bv.rows())));
}

Var mean_row_l1(Tape& tape, Var a, Var b, Var scores) {
    const std::size_t rows = tape.val(a).rows();
    Var l1 = tape.row_sum(tape.abs(tape.sub(a, b)));
    if (scores.valid()) l1 = tape.mul(l1, scores);
    return tape.scale(tape.sum(l1), 1.0 / static_cast<double>(rows));
}

Var mean_one_minus_cos(Tape& tape, Var n1, Var n2, Var scores) {
    const std::size_t rows = tape.val(n1).rows();
    Var cos = tape.row_sum(tape.mul(n1, n2));
    Var one_minus = tape.shift(tape.scale(cos, -1.0), 1.0);
    if (scores.valid()) one_minus = tape.mul(one_minus, scores);
    return tape.scale(tape.sum(one_minus), 1.0 / static_cast<double>(rows));
}

CycleTerms cycle_consistency_terms(Tape& tape, Var p, Var p_cycle, Var qhat,
                                   Var qhat_cycle, Var n, Var n_cycle,
                                   bool with_normals) {
    CycleTerms t;
    t.position = mean_row_l1(tape, p, p_cycle);
    t.uv = mean_row_l1(tape, qhat, qhat_cycle);
    t.normal = with_normals ? mean_one_minus_cos(tape, n, n_cycle)
                            : tape.constant(Matrix(1, 1, 0.0));
    t.total = tape.add(tape.add(t.position, t.uv), t.normal);
    return t;
}

Var cycle_consistency_loss(Tape& tape, Var p, Var p_cycle, Var qhat, Var qhat_cycle,
                           Var n, Var n_cycle, bool with_normals) {
    return cycle_consistency_terms(tape, p, p_cycle, qhat, qhat_cycle, n, n_cycle,
                                   with_normals)
        .total;
}

Var singular_gap_sum(Tape& tape, Var t1_p, Var t2_p) {
    // for B = [b1 b2], BᵀB = [[m11,m12],[m12,m22]] and
    // λ₁ − λ₂ = √((m11 − m22)² + 4·m12²)
    Var m11 = tape.row_sum(tape.square(t1_p));
    Var m22 = tape.row_sum(tape.square(t2_p));
    Var m12 = tape.row_sum(tape.mul(t1_p, t2_p));
    Var gap = tape.sqrt0(
        tape.add(tape.square(tape.sub(m11, m22)), tape.scale(tape.square(m12), 4.0)));
    return tape.sum(gap);
}

Var differential_distortion_loss(Tape& tape, WrapNet& net, Var q, Var qhat) {
    const std::size_t rows = tape.val(q).rows();
    WrapJvpOut jvp = wrap_forward_jvp(tape, net, tape.concat_rows(q, qhat));
    return tape.scale(singular_gap_sum(tape, jvp.t1_p, jvp.t2_p),
                      1.0 / static_cast<double>(rows));
}

Var triangle_distortion_loss(Tape& tape, const SurfaceMesh& mesh, Var q, TdlMode mode,
                             Var scores) {
    const Matrix& qv = tape.val(q);
    if (qv.rows() != mesh.vertex_count() || qv.cols() != 2)
        throw ArgumentError("triangle_distortion_loss: q must be V×2, row-aligned");
    const std::size_t t_count = mesh.face_count();
    if (t_count == 0) throw ArgumentError("triangle_distortion_loss: mesh has no faces");
    const double inv3t = 1.0 / (3.0 * static_cast<double>(t_count));

    if (mode == TdlMode::kConformal) {
        std::vector<std::size_t> ia(3 * t_count), ib(3 * t_count), ic(3 * t_count);
        Matrix beta(3 * t_count, 1);
        for (std::size_t t = 0; t < t_count; ++t) {
            const auto& f = mesh.faces[t];
            for (std::size_t c = 0; c < 3; ++c) {
                const std::size_t row = 3 * t + c;
                ia[row] = f[c];
                ib[row] = f[(c + 1) % 3];
                ic[row] = f[(c + 2) % 3];
                beta(row, 0) = corner_angle(mesh.vertices.row(ia[row]),
                                            mesh.vertices.row(ib[row]),
                                            mesh.vertices.row(ic[row]), 3);
            }
        }
        Var corner = tape.gather_rows(q, ia);
        Var e1 = tape.sub(tape.gather_rows(q, ib), corner);
        Var e2 = tape.sub(tape.gather_rows(q, ic), corner);
        Var cos = tape.row_sum(tape.mul(tape.normalize_rows(e1), tape.normalize_rows(e2)));

        // degenerate corners (an incident UV edge of ~zero length) are pinned
        // to the clamp angle and cut out of the gradient
        const Matrix& e1v = tape.val(e1);
        const Matrix& e2v = tape.val(e2);
        Matrix keep(3 * t_count, 1), pin(3 * t_count, 1);
        for (std::size_t r = 0; r < 3 * t_count; ++r) {
            const double l1 = std::hypot(e1v(r, 0), e1v(r, 1));
            const double l2 = std::hypot(e2v(r, 0), e2v(r, 1));
            const bool degenerate = l1 < kDegenerateEdge || l2 < kDegenerateEdge;
            keep(r, 0) = degenerate ? 0.0 : 1.0;
            pin(r, 0) = degenerate ? -1.0 + kAcosGuard : 0.0;
        }
        Var cos_eff = tape.add(tape.mul(cos, tape.constant(std::move(keep))),
                               tape.constant(std::move(pin)));
        Var theta = tape.acos_clamped(cos_eff, kAcosGuard);
        Var diff = tape.abs(tape.sub(theta, tape.constant(std::move(beta))));
        return tape.scale(tape.sum(diff), inv3t);
    }

    // isometric mode: per triangle edge, score-weighted squared length gap
    if (scores.valid() &&
        (tape.val(scores).rows() != qv.rows() || tape.val(scores).cols() != 1))
        throw ArgumentError("triangle_distortion_loss: scores must be V×1");
    std::vector<std::size_t> ia(3 * t_count), ib(3 * t_count);
    Matrix len3d(3 * t_count, 1);
    for (std::size_t t = 0; t < t_count; ++t) {
        const auto& f = mesh.faces[t];
        for (std::size_t e = 0; e < 3; ++e) {
            const std::size_t row = 3 * t + e;
            ia[row] = f[e];
            ib[row] = f[(e + 1) % 3];
            const double* pa = mesh.vertices.row(ia[row]);
            const double* pb = mesh.vertices.row(ib[row]);
            len3d(row, 0) = std::sqrt((pa[0] - pb[0]) * (pa[0] - pb[0]) +
                                      (pa[1] - pb[1]) * (pa[1] - pb[1]) +
                                      (pa[2] - pb[2]) * (pa[2] - pb[2]));
        }
    }
    Var duv = tape.sqrt0(
        tape.row_sum(tape.square(tape.sub(tape.gather_rows(q, ia), tape.gather_rows(q, ib)))));
    Var sq = tape.square(tape.sub(tape.constant(std::move(len3d)), duv));
    if (scores.valid()) {
        Var se = tape.scale(
            tape.add(tape.gather_rows(scores, ia), tape.gather_rows(scores, ib)), 0.5);
        sq = tape.mul(sq, se);
    }
    return tape.scale(tape.sum(sq), inv3t);
}

Var global_loss(Tape& tape, Var l_u, Var l_w, Var l_c, Var l_diff, Var l_tri,
                const GlobalLossWeights& w) {
    const char* names[5] = {"unwrapping", "wrapping", "cycle", "differential",
                            "triangle"};
    const Var terms[5] = {l_u, l_w, l_c, l_diff, l_tri};
    for (int i = 0; i < 5; ++i) {
        require_scalar(tape, terms[i], "global_loss");
        if (!std::isfinite(tape.scalar(terms[i])))
            throw NumericError(std::string("global_loss: ") + names[i] +
                               " term is not finite");
    }
    Var total = tape.scale(l_u, w.alpha_u);
    total = tape.add(total, tape.scale(l_w, w.alpha_w));
    total = tape.add(total, tape.scale(l_c, w.alpha_c));
    total = tape.add(total, tape.scale(l_diff, w.alpha_diff));
    total = tape.add(total, tape.scale(l_tri, w.alpha_tri));
    return total;
}

double global_loss(double l_u, double l_w, double l_c, double l_diff, double l_tri,
                   const GlobalLossWeights& w) {
    const char* names[5] = {"unwrapping", "wrapping", "cycle", "differential",
                            "triangle"};
    const double terms[5] = {l_u, l_w, l_c, l_diff, l_tri};
    for (int i = 0; i < 5; ++i)
        if (!std::isfinite(terms[i]))
            throw NumericError(std::string("global_loss: ") + names[i] +
                               " term is not finite");
    double total = w.alpha_u * l_u;
    total = total + w.alpha_w * l_w;
    total = total + w.alpha_c * l_c;
    total = total + w.alpha_diff * l_diff;
    total = total + w.alpha_tri * l_tri;
    return total;
}

ChartTerms chart_losses(Tape& tape, Var s_k, Var q_k, Var p, Var p_cycle, Var n,
                        Var n_cycle, const SurfaceMesh& mesh, const NeighborTable& nb,
                        double eps_k, const ChartLossWeights& w) {
    ChartTerms t;
    t.hinge = unwrapping_loss(tape, q_k, nb, eps_k, s_k);
    t.cycle_position = mean_row_l1(tape, p, p_cycle, s_k);
    t.cycle_normal = mean_one_minus_cos(tape, n, n_cycle, s_k);
    t.tdl = triangle_distortion_loss(tape, mesh, q_k, TdlMode::kIsometric, s_k);
    t.total = tape.add(
        tape.add(tape.scale(t.hinge, w.alpha_u),
                 tape.scale(tape.add(t.cycle_position, t.cycle_normal), w.alpha_c)),
        tape.scale(t.tdl, w.alpha_tri));
    return t;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

DistortionReport evaluate(const SurfaceMesh& mesh, const Matrix& uv,
                          const std::vector<std::size_t>& labels,
                          const std::vector<std::size_t>& seam_vertices) {
    const std::size_t v_count = mesh.vertex_count();
    if (uv.rows() != v_count || uv.cols() != 2)
        throw ArgumentError("evaluate: UV must cover every vertex (V×2)");
    if (labels.size() != v_count)
        throw ArgumentError("evaluate: labels must cover every vertex");

    DistortionReport rep;
    rep.vertices = static_cast<std::int64_t>(v_count);
    rep.faces = static_cast<std::int64_t>(mesh.face_count());

    std::set<std::size_t> chart_ids(labels.begin(), labels.end());
    rep.charts = static_cast<std::int64_t>(chart_ids.size());

    // label-uniform triangles participate in the distortion metrics
    std::vector<bool> uniform(mesh.face_count());
    for (std::size_t t = 0; t < mesh.face_count(); ++t) {
        const auto& f = mesh.faces[t];
        uniform[t] = labels[f[0]] == labels[f[1]] && labels[f[1]] == labels[f[2]];
    }

    // conformal
    double angle_sum = 0.0;
    std::size_t angle_count = 0;
    for (std::size_t t = 0; t < mesh.face_count(); ++t) {
        if (!uniform[t]) continue;
        const auto& f = mesh.faces[t];
        for (std::size_t c = 0; c < 3; ++c) {
            const double beta =
                corner_angle(mesh.vertices.row(f[c]), mesh.vertices.row(f[(c + 1) % 3]),
                             mesh.vertices.row(f[(c + 2) % 3]), 3);
            const double theta =
                corner_angle(uv.row(f[c]), uv.row(f[(c + 1) % 3]),
                             uv.row(f[(c + 2) % 3]), 2);
            angle_sum += std::fabs(theta - beta);
            ++angle_count;
        }
    }
    if (angle_count > 0) rep.conformal = angle_sum / static_cast<double>(angle_count);

    // areas: normalized per included triangle
    auto signed_uv_area = [&](const std::array<std::size_t, 3>& f) {
        const double* a = uv.row(f[0]);
        const double* b = uv.row(f[1]);
        const double* c = uv.row(f[2]);
        return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    };
    double total_uv = 0.0, total_3d = 0.0;
    std::size_t tri_count = 0;
    for (std::size_t t = 0; t < mesh.face_count(); ++t) {
        if (!uniform[t]) continue;
        total_uv += std::fabs(signed_uv_area(mesh.faces[t]));
        total_3d += face_area_3d(mesh.vertices, mesh.faces[t]);
        ++tri_count;
    }
    if (tri_count > 0 && total_uv > 0.0 && total_3d > 0.0) {
        double sq = 0.0;
        for (std::size_t t = 0; t < mesh.face_count(); ++t) {
            if (!uniform[t]) continue;
            const double d = std::fabs(signed_uv_area(mesh.faces[t])) / total_uv -
                             face_area_3d(mesh.vertices, mesh.faces[t]) / total_3d;
            sq += d * d;
        }
        rep.equiareal = sq / static_cast<double>(tri_count);
    }

    // isometric over same-chart edges with a least-squares global scale
    const auto edges = unique_edges(mesh.faces);
    double num = 0.0, den = 0.0;
    for (const auto& [a, b] : edges) {
        if (labels[a] != labels[b]) continue;
        const double l3 = edge_len(mesh.vertices, a, b);
        const double lu = edge_len_2d(uv, a, b);
        num += l3 * lu;
        den += lu * lu;
    }
    const double c_scale = den > 0.0 ? num / den : 0.0;
    double iso_sum = 0.0;
    std::size_t iso_count = 0;
    for (const auto& [a, b] : edges) {
        if (labels[a] != labels[b]) continue;
        const double d = edge_len(mesh.vertices, a, b) - c_scale * edge_len_2d(uv, a, b);
        iso_sum += d * d;
        ++iso_count;
    }
    if (iso_count > 0) rep.isometric = iso_sum / static_cast<double>(iso_count);

    // flipped: per chart, minority orientation count
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> orient;  // chart → (pos,neg)
    for (std::size_t t = 0; t < mesh.face_count(); ++t) {
        if (!uniform[t]) continue;
        const double a = signed_uv_area(mesh.faces[t]);
        auto& [pos, neg] = orient[labels[mesh.faces[t][0]]];
        if (a > 0.0)
            ++pos;
        else if (a < 0.0)
            ++neg;
    }
    std::int64_t flipped = 0;
    for (std::size_t t = 0; t < mesh.face_count(); ++t) {
        if (!uniform[t]) continue;
        const double a = signed_uv_area(mesh.faces[t]);
        const auto& [pos, neg] = orient[labels[mesh.faces[t][0]]];
        const double majority = pos >= neg ? 1.0 : -1.0;
        if (a * majority < 0.0) ++flipped;
    }
    rep.flipped = flipped;

    // seams: chart-crossing edges plus edges with both ends flagged
    std::set<std::size_t> seam_set(seam_vertices.begin(), seam_vertices.end());
    double seam_len = 0.0;
    for (const auto& [a, b] : edges) {
        if (labels[a] != labels[b] || (seam_set.count(a) && seam_set.count(b)))
            seam_len += edge_len(mesh.vertices, a, b);
    }
    rep.seam_length = seam_len;
    return rep;
}

std::vector<ChartMetrics> per_chart_metrics(const SurfaceMesh& mesh, const Matrix& uv,
                                            const std::vector<std::size_t>& labels) {
    std::map<std::size_t, ChartMetrics> by_chart;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& m = by_chart[labels[i]];
        m.chart = labels[i];
        ++m.vertices;
    }
    auto signed_uv_area = [&](const std::array<std::size_t, 3>& f) {
        const double* a = uv.row(f[0]);
        const double* b = uv.row(f[1]);
        const double* c = uv.row(f[2]);
        return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    };
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> orient;
    std::map<std::size_t, double> angle_sum;
    for (const auto& f : mesh.faces) {
        if (labels[f[0]] != labels[f[1]] || labels[f[1]] != labels[f[2]]) continue;
        auto& m = by_chart[labels[f[0]]];
        ++m.triangles;
        for (std::size_t c = 0; c < 3; ++c) {
            const double beta =
                corner_angle(mesh.vertices.row(f[c]), mesh.vertices.row(f[(c + 1) % 3]),
                             mesh.vertices.row(f[(c + 2) % 3]), 3);
            const double theta = corner_angle(uv.row(f[c]), uv.row(f[(c + 1) % 3]),
                                              uv.row(f[(c + 2) % 3]), 2);
            angle_sum[labels[f[0]]] += std::fabs(theta - beta);
        }
        const double a = signed_uv_area(f);
        auto& [pos, neg] = orient[labels[f[0]]];
        if (a > 0.0)
            ++pos;
        else if (a < 0.0)
            ++neg;
    }
    for (const auto& f : mesh.faces) {
        if (labels[f[0]] != labels[f[1]] || labels[f[1]] != labels[f[2]]) continue;
        const auto& [pos, neg] = orient[labels[f[0]]];
        const double majority = pos >= neg ? 1.0 : -1.0;
        if (signed_uv_area(f) * majority < 0.0) ++by_chart[labels[f[0]]].flipped;
    }
    std::vector<ChartMetrics> out;
    for (auto& [id, m] : by_chart) {
        if (m.triangles > 0)
            m.conformal = angle_sum[id] / (3.0 * static_cast<double>(m.triangles));
        out.push_back(m);
    }
    return out;
}

DistortionReport evaluate_pointcloud(const Matrix& points, const Matrix& uv) {
    if (uv.rows() != points.rows() || uv.cols() != 2)
        throw ArgumentError("evaluate_pointcloud: UV must cover every point (V×2)");
    DistortionReport rep;
    rep.vertices = static_cast<std::int64_t>(points.rows());
    rep.faces = 0;
    rep.charts = 1;
    if (points.rows() < 2) return rep;

    const std::size_t k = std::min<std::size_t>(6, points.rows() - 1);
    NeighborTable nb = knn(points, points, k);
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < points.rows(); ++i)
        for (std::size_t j : nb.neighbors[i])
            edges.emplace(std::min(i, j), std::max(i, j));

    double num = 0.0, den = 0.0;
    for (const auto& [a, b] : edges) {
        const double l3 = edge_len(points, a, b);
        const double lu = edge_len_2d(uv, a, b);
        num += l3 * lu;
        den += lu * lu;
    }
    const double c_scale = den > 0.0 ? num / den : 0.0;
    double iso_sum = 0.0;
    for (const auto& [a, b] : edges) {
        const double d = edge_len(points, a, b) - c_scale * edge_len_2d(uv, a, b);
        iso_sum += d * d;
    }
    if (!edges.empty()) rep.isometric = iso_sum / static_cast<double>(edges.size());
    return rep;
}

}  // namespace uvmap
