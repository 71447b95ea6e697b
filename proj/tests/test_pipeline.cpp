#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "uvmap/checkpoint.hpp"
#include "uvmap/pipeline.hpp"

using uvmap::ChartPartition;
using uvmap::ChartRunConfig;
using uvmap::GlobalRunConfig;
using uvmap::Matrix;
using uvmap::Rng;
using uvmap::SeamSet;
using uvmap::Tape;
using uvmap::Var;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * a.rows() * a.cols()) == 0;
}

// planar lattice as a point matrix: nx×ny points on [0,1]², z = 0
Matrix flat_points(std::size_t nx, std::size_t ny) {
    Matrix p(nx * ny, 3);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t r = i * ny + j;
            p(r, 0) = static_cast<double>(i) / static_cast<double>(nx - 1);
            p(r, 1) = static_cast<double>(j) / static_cast<double>(ny - 1);
            p(r, 2) = 0.0;
        }
    return p;
}

// axis-aligned bounding box of the rows of `uv` restricted to `members`
struct Box {
    double lo[2], hi[2];
};
Box content_box(const Matrix& uv, const std::vector<std::size_t>& members) {
    Box b{{uv(members[0], 0), uv(members[0], 1)},
          {uv(members[0], 0), uv(members[0], 1)}};
    for (std::size_t i : members)
        for (int c = 0; c < 2; ++c) {
            b.lo[c] = std::min(b.lo[c], uv(i, c));
            b.hi[c] = std::max(b.hi[c], uv(i, c));
        }
    return b;
}

bool boxes_disjoint(const Box& a, const Box& b) {
    return a.hi[0] < b.lo[0] || b.hi[0] < a.lo[0] || a.hi[1] < b.lo[1] ||
           b.hi[1] < a.lo[1];
}

}  // namespace

// ---------------------------------------------------------------------------
// seam extraction
// ---------------------------------------------------------------------------

TEST_CASE("extract_seams on an identical planar embedding") {
    // 5×5 lattice with spacing h: every UV gap equals a 3D neighbor distance,
    // so η ∈ [h, h√2] at every vertex
    const Matrix p = flat_points(5, 5);
    Matrix q(p.rows(), 2);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        q(i, 0) = p(i, 0);
        q(i, 1) = p(i, 1);
    }
    const double h = 0.25;

    SeamSet far = uvmap::extract_seams(p, q, 2.0 * h, 3);
    CHECK(far.points.empty());
    CHECK(far.tau == 2.0 * h);

    SeamSet all = uvmap::extract_seams(p, q, 0.5 * h, 3);
    CHECK(all.points.size() == p.rows());
    for (std::size_t i = 0; i < all.points.size(); ++i) {
        CHECK(all.points[i].vertex == i);  // ascending vertex order
        CHECK(all.points[i].eta >= h - 1e-12);
        CHECK(all.points[i].eta <= h * std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("extract_seams flags a displaced vertex") {
    const Matrix p = flat_points(5, 5);
    Matrix q(p.rows(), 2);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        q(i, 0) = p(i, 0);
        q(i, 1) = p(i, 1);
    }
    const double tau = 0.5;  // above every lattice gap (max h√2 ≈ 0.354)
    CHECK(uvmap::extract_seams(p, q, tau, 3).points.empty());

    // tearing one UV image far away flags the vertex and its 3D neighbors
    const std::size_t torn = 12;  // lattice center
    q(torn, 0) += 10.0 * tau;
    SeamSet s = uvmap::extract_seams(p, q, tau, 3);
    CHECK(!s.points.empty());
    bool torn_found = false;
    for (const auto& sp : s.points)
        if (sp.vertex == torn) {
            torn_found = true;
            CHECK(sp.eta > 10.0 * tau - 1.0);
        }
    CHECK(torn_found);

    auto expect = oracle::seams_brute(p, q, tau, 3);
    REQUIRE(s.points.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(s.points[i].vertex == expect[i].first);
        CHECK(s.points[i].eta == doctest::Approx(expect[i].second).epsilon(1e-12));
    }
}

TEST_CASE("extract_seams matches the brute-force scan on random instances") {
    Rng rng(901);
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t v = 5 + rng.integer(36);
        const std::size_t j_cut = 1 + rng.integer(std::min<std::size_t>(4, v - 1));
        const Matrix p = oracle::random_matrix(rng, v, 3);
        const Matrix q = oracle::random_matrix(rng, v, 2);
        const double tau = rng.uniform(0.0, 2.0);

        SeamSet got = uvmap::extract_seams(p, q, tau, j_cut);
        auto expect = oracle::seams_brute(p, q, tau, j_cut);
        REQUIRE(got.points.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(got.points[i].vertex == expect[i].first);
            CHECK(std::abs(got.points[i].eta - expect[i].second) <= 1e-12);
        }
    }

    // one large instance; τ at the median gap keeps both verdicts populated
    const std::size_t v = 500;
    const Matrix p = oracle::random_matrix(rng, v, 3);
    const Matrix q = oracle::random_matrix(rng, v, 2);
    std::vector<double> gaps;
    for (const auto& e : oracle::seams_brute(p, q, -1.0, 3)) gaps.push_back(e.second);
    std::sort(gaps.begin(), gaps.end());
    const double tau_median = gaps[gaps.size() / 2];
    SeamSet got = uvmap::extract_seams(p, q, tau_median, 3);
    auto expect = oracle::seams_brute(p, q, tau_median, 3);
    REQUIRE(got.points.size() == expect.size());
    CHECK(!got.points.empty());
    CHECK(got.points.size() < v);  // mixed verdicts, not a vacuous τ
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(got.points[i].vertex == expect[i].first);
        CHECK(std::abs(got.points[i].eta - expect[i].second) <= 1e-12);
    }
}

TEST_CASE("extract_seams rejects bad arguments") {
    Rng rng(1);
    const Matrix p = oracle::random_matrix(rng, 6, 3);
    const Matrix q2 = oracle::random_matrix(rng, 5, 2);
    const Matrix q = oracle::random_matrix(rng, 6, 2);
    CHECK_THROWS_AS(uvmap::extract_seams(p, q2, 0.1, 2), uvmap::ArgumentError);
    CHECK_THROWS_AS(uvmap::extract_seams(p, q, 0.1, 0), uvmap::ArgumentError);
    CHECK_THROWS_AS(uvmap::extract_seams(p, q, 0.1, 6), uvmap::ArgumentError);
}

TEST_CASE("extract_seams_mesh scans one-ring neighborhoods") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(4, 4);
    Matrix q(mesh.vertex_count(), 2);
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        q(i, 0) = mesh.vertices(i, 0);
        q(i, 1) = mesh.vertices(i, 1);
    }

    // brute scan over the rings induced by the face list
    const auto ring = uvmap::one_ring(mesh.vertex_count(), mesh.faces);
    auto brute = [&](double tau) {
        std::vector<std::pair<std::size_t, double>> out;
        for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
            double eta = 0.0;
            for (std::size_t j : ring[i])
                eta = std::max(eta, uvmap::edge_len_2d(q, i, j));
            if (eta > tau) out.emplace_back(i, eta);
        }
        return out;
    };

    for (double tau : {0.05, 0.3, 0.4, 1.0}) {
        SeamSet got = uvmap::extract_seams_mesh(mesh, q, tau);
        auto expect = brute(tau);
        REQUIRE(got.points.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(got.points[i].vertex == expect[i].first);
            CHECK(std::abs(got.points[i].eta - expect[i].second) <= 1e-12);
        }
    }
    // rings include the diagonal edge of each quad, so η ≥ h√2 > h everywhere
    CHECK(uvmap::extract_seams_mesh(mesh, q, 1.0).points.empty());
    CHECK(uvmap::extract_seams_mesh(mesh, q, 0.05).points.size() ==
          mesh.vertex_count());

    Matrix q_short(3, 2);
    CHECK_THROWS_AS(uvmap::extract_seams_mesh(mesh, q_short, 0.1),
                    uvmap::ArgumentError);
}

// ---------------------------------------------------------------------------
// chart extraction
// ---------------------------------------------------------------------------

TEST_CASE("extract_charts takes row argmax with ties to the lowest index") {
    const Matrix uniform(5, 4, 0.25);
    ChartPartition part = uvmap::extract_charts(uniform);
    REQUIRE(part.labels.size() == 5);
    for (std::size_t l : part.labels) CHECK(l == 0);
    CHECK(part.members[0].size() == 5);
    CHECK(part.members[1].empty());

    const Matrix onehot = from_rows({{0.0, 1.0, 0.0},
                                     {0.0, 0.0, 1.0},
                                     {1.0, 0.0, 0.0},
                                     {0.0, 0.0, 1.0}});
    part = uvmap::extract_charts(onehot);
    CHECK(part.labels == std::vector<std::size_t>{1, 2, 0, 2});
    CHECK(part.members[2] == std::vector<std::size_t>{1, 3});

    CHECK_THROWS_AS(uvmap::extract_charts(Matrix()), uvmap::ArgumentError);
}

TEST_CASE("extract_charts matches the brute-force argmax on random instances") {
    Rng rng(902);
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t v = 1 + rng.integer(40);
        const std::size_t k = 1 + rng.integer(9);
        Matrix s = oracle::random_matrix(rng, v, k, 0.0, 1.0);
        if (inst % 3 == 0 && v >= 2) {
            // inject exact ties
            s(0, k - 1) = s(0, 0);
            for (std::size_t j = 0; j < k; ++j) s(1, j) = 0.5;
        }
        ChartPartition part = uvmap::extract_charts(s);
        CHECK(part.labels == oracle::argmax_labels_brute(s));
        REQUIRE(part.members.size() == k);
        std::size_t total = 0;
        for (std::size_t c = 0; c < k; ++c) {
            total += part.members[c].size();
            for (std::size_t pos = 0; pos < part.members[c].size(); ++pos) {
                CHECK(part.labels[part.members[c][pos]] == c);
                if (pos > 0)  // ascending, duplicate-free
                    CHECK(part.members[c][pos - 1] < part.members[c][pos]);
            }
        }
        CHECK(total == v);  // members partition the vertex set
    }
}

// ---------------------------------------------------------------------------
// atlas packing
// ---------------------------------------------------------------------------

TEST_CASE("pack_atlas centers a single chart with a 2% margin") {
    const Matrix uv = from_rows({{0.0, 0.0}, {2.0, 0.0}, {2.0, 2.0}, {0.0, 2.0}});
    ChartPartition part;
    part.labels = {0, 0, 0, 0};
    part.members = {{0, 1, 2, 3}};

    uvmap::AtlasLayout atlas = uvmap::pack_atlas({uv}, part);
    REQUIRE(atlas.placements.size() == 1);
    Box b = content_box(atlas.uv, part.members[0]);
    CHECK(b.lo[0] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(b.lo[1] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(b.hi[0] == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(b.hi[1] == doctest::Approx(0.99).epsilon(1e-12));

    // the affine placement reproduces the atlas rows bit-exactly
    const uvmap::AtlasPlacement& pl = atlas.placements[0];
    CHECK(pl.scale > 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(atlas.uv(i, 0) == pl.scale * uv(i, 0) + pl.tx);
        CHECK(atlas.uv(i, 1) == pl.scale * uv(i, 1) + pl.ty);
    }
}

TEST_CASE("pack_atlas preserves the aspect ratio of a lone rectangle") {
    const Matrix uv = from_rows({{0.0, 0.0}, {4.0, 0.0}, {4.0, 1.0}, {0.0, 1.0}});
    ChartPartition part;
    part.labels = {0, 0, 0, 0};
    part.members = {{0, 1, 2, 3}};

    uvmap::AtlasLayout atlas = uvmap::pack_atlas({uv}, part);
    Box b = content_box(atlas.uv, part.members[0]);
    const double w = b.hi[0] - b.lo[0];
    const double h = b.hi[1] - b.lo[1];
    CHECK(w / h == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(b.lo[0] >= 0.0);
    CHECK(b.hi[0] <= 1.0);
    CHECK(b.lo[1] >= 0.0);
    CHECK(b.hi[1] <= 1.0);
}

TEST_CASE("pack_atlas keeps two equal squares apart") {
    // both charts map the full vertex set; only member rows matter
    Matrix uv0(8, 2), uv1(8, 2);
    const double sq[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    for (std::size_t i = 0; i < 8; ++i)
        for (int c = 0; c < 2; ++c) {
            uv0(i, c) = sq[i % 4][c];
            uv1(i, c) = sq[i % 4][c] + 5.0;  // same shape, different origin
        }
    ChartPartition part;
    part.labels = {0, 0, 0, 0, 1, 1, 1, 1};
    part.members = {{0, 1, 2, 3}, {4, 5, 6, 7}};

    uvmap::AtlasLayout atlas = uvmap::pack_atlas({uv0, uv1}, part);
    Box b0 = content_box(atlas.uv, part.members[0]);
    Box b1 = content_box(atlas.uv, part.members[1]);
    CHECK(boxes_disjoint(b0, b1));
    // equal squares split the unit strip: each content square has side 0.49
    CHECK(b0.hi[0] - b0.lo[0] == doctest::Approx(0.49).epsilon(1e-12));
    CHECK(b1.hi[1] - b1.lo[1] == doctest::Approx(0.49).epsilon(1e-12));
    CHECK(atlas.placements[0].scale == atlas.placements[1].scale);
}

TEST_CASE("pack_atlas keeps random chart contents pairwise disjoint") {
    Rng rng(903);
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t k = 2 + rng.integer(7);
        const std::size_t per = 4 + rng.integer(5);
        const std::size_t v = k * per;
        ChartPartition part;
        part.labels.resize(v);
        part.members.resize(k);
        std::vector<Matrix> maps(k, Matrix(v, 2));
        for (std::size_t c = 0; c < k; ++c) {
            const double ox = rng.uniform(-4.0, 4.0), oy = rng.uniform(-4.0, 4.0);
            const double sx = rng.uniform(0.2, 3.0), sy = rng.uniform(0.2, 3.0);
            for (std::size_t c2 = 0; c2 < k; ++c2)
                for (std::size_t i = 0; i < v; ++i) {
                    maps[c2](i, 0) = rng.uniform(-1.0, 1.0);
                    maps[c2](i, 1) = rng.uniform(-1.0, 1.0);
                }
            for (std::size_t j = 0; j < per; ++j) {
                const std::size_t vid = c * per + j;
                part.labels[vid] = c;
                part.members[c].push_back(vid);
                maps[c](vid, 0) = ox + sx * rng.uniform(0.0, 1.0);
                maps[c](vid, 1) = oy + sy * rng.uniform(0.0, 1.0);
            }
        }

        uvmap::AtlasLayout atlas = uvmap::pack_atlas(maps, part);
        std::vector<Box> boxes;
        for (std::size_t c = 0; c < k; ++c) {
            boxes.push_back(content_box(atlas.uv, part.members[c]));
            CHECK(boxes.back().lo[0] >= -1e-12);
            CHECK(boxes.back().lo[1] >= -1e-12);
            CHECK(boxes.back().hi[0] <= 1.0 + 1e-12);
            CHECK(boxes.back().hi[1] <= 1.0 + 1e-12);
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b)
                CHECK(boxes_disjoint(boxes[a], boxes[b]));

        // every chart shares one global scale, and the map is the stated affine
        for (std::size_t c = 0; c < k; ++c) {
            CHECK(atlas.placements[c].scale == atlas.placements[0].scale);
            for (std::size_t i : part.members[c]) {
                CHECK(atlas.uv(i, 0) ==
                      atlas.placements[c].scale * maps[c](i, 0) + atlas.placements[c].tx);
                CHECK(atlas.uv(i, 1) ==
                      atlas.placements[c].scale * maps[c](i, 1) + atlas.placements[c].ty);
            }
        }
    }
}

TEST_CASE("pack_atlas leaves empty charts at the identity placement") {
    Matrix uv(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        uv(i, 0) = static_cast<double>(i % 2);
        uv(i, 1) = static_cast<double>(i / 2);
    }
    ChartPartition part;
    part.labels = {0, 0, 0, 0};
    part.members = {{0, 1, 2, 3}, {}, {}};
    uvmap::AtlasLayout atlas = uvmap::pack_atlas({uv, uv, uv}, part);
    REQUIRE(atlas.placements.size() == 3);
    CHECK(atlas.placements[1].scale == 1.0);
    CHECK(atlas.placements[1].tx == 0.0);
    CHECK(atlas.placements[2].ty == 0.0);

    CHECK_THROWS_AS(uvmap::pack_atlas({uv, uv}, part), uvmap::ArgumentError);
    ChartPartition empty_part;
    empty_part.labels = {0, 0, 0, 0};
    empty_part.members = {{}};
    CHECK_THROWS_AS(uvmap::pack_atlas({uv}, empty_part), uvmap::ArgumentError);
}

TEST_CASE("packing preserves per-chart conformal distortion") {
    const std::size_t nx = 6, ny = 6;
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(nx, ny);
    const std::size_t v = mesh.vertex_count();
    Rng rng(904);
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t k = 2 + rng.integer(2);
        ChartPartition part;
        part.labels.resize(v);
        part.members.assign(k, {});
        // bands of ≥ 2 whole grid rows ⇒ every chart keeps label-uniform faces
        for (std::size_t i = 0; i < v; ++i) {
            const std::size_t c = std::min(k - 1, ((i / ny) * k) / nx);
            part.labels[i] = c;
            part.members[c].push_back(i);
        }
        std::vector<Matrix> maps;
        for (std::size_t c = 0; c < k; ++c)
            maps.push_back(oracle::random_matrix(rng, v, 2, -2.0, 2.0));

        // stitched map: each vertex through its own chart's UV
        Matrix stitched(v, 2);
        for (std::size_t i = 0; i < v; ++i) {
            stitched(i, 0) = maps[part.labels[i]](i, 0);
            stitched(i, 1) = maps[part.labels[i]](i, 1);
        }
        uvmap::AtlasLayout atlas = uvmap::pack_atlas(maps, part);

        auto before = uvmap::per_chart_metrics(mesh, stitched, part.labels);
        auto after = uvmap::per_chart_metrics(mesh, atlas.uv, part.labels);
        REQUIRE(before.size() == after.size());
        for (std::size_t c = 0; c < before.size(); ++c) {
            CHECK(before[c].chart == after[c].chart);
            CHECK(before[c].vertices == after[c].vertices);
            CHECK(before[c].triangles == after[c].triangles);
            CHECK(before[c].triangles > 0);
            // packing is a positive similarity per chart: angles and
            // orientations survive
            CHECK(after[c].conformal ==
                  doctest::Approx(before[c].conformal).epsilon(1e-9));
            CHECK(after[c].flipped == before[c].flipped);
        }
    }
}

// ---------------------------------------------------------------------------
// global trainer
// ---------------------------------------------------------------------------

TEST_CASE("train_global validates its configuration") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(3, 3);
    GlobalRunConfig cfg;
    cfg.iterations = 0;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.eps_coef = 0.0;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.tau_coef = -1.0;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.lr_min = 1.0;
    cfg.lr = 1e-3;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.j_u = 0;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.j_cut = 0;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.refresh_every = 0;
    CHECK_THROWS_AS(uvmap::train_global(mesh, cfg), uvmap::ArgumentError);

    uvmap::SurfaceMesh tri;
    tri.vertices = from_rows({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
    tri.normals = from_rows({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}});
    tri.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(uvmap::train_global(tri, GlobalRunConfig{}), uvmap::ArgumentError);
}

TEST_CASE("train_global produces a complete result on a tiny run") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(3, 3);
    GlobalRunConfig cfg;
    cfg.iterations = 10;
    cfg.seed = 5;
    cfg.progress_every = 7;  // fires at 7 and at the final iteration
    std::vector<std::size_t> seen;
    cfg.on_progress = [&](const uvmap::ProgressInfo& info) {
        seen.push_back(info.iteration);
        CHECK(info.total == 10);
        CHECK(info.eps > 0.0);
        CHECK(info.tau > 0.0);
        CHECK(std::isfinite(info.loss_total));
    };

    uvmap::UVResult res = uvmap::train_global(mesh, cfg);
    CHECK(seen == std::vector<std::size_t>{7, 10});
    CHECK(res.uv.rows() == 9);
    CHECK(res.uv.cols() == 2);
    CHECK(res.iterations_run == 10);
    CHECK(res.nets.parameters().size() == 50);
    CHECK(res.final_losses.iteration == 10);
    CHECK(res.report.vertices == 9);
    CHECK(res.report.faces == 8);
    CHECK(res.report.charts == 1);
    CHECK(res.report.iterations == 10);
    CHECK(res.report.seed == 5);
    CHECK(res.report.conformal.has_value());
    CHECK(res.report.wall_seconds > 0.0);
    CHECK(res.seams.tau > 0.0);

    // τ/ε = (tau_coef/eps_coef)·√V for any live bounding box
    const double ratio = res.final_losses.tau / res.final_losses.eps;
    CHECK(ratio == doctest::Approx(0.02 / 0.2 * 3.0).epsilon(1e-12));
}

TEST_CASE("train_global point-cloud mode drops the normal and triangle terms") {
    uvmap::PointSet cloud;
    cloud.points = flat_points(4, 4);
    REQUIRE(!cloud.has_normals());

    GlobalRunConfig cfg;
    cfg.iterations = 3;
    cfg.seed = 2;
    cfg.progress_every = 1;
    std::vector<double> normals_seen, tri_seen;
    cfg.on_progress = [&](const uvmap::ProgressInfo& info) {
        normals_seen.push_back(info.cycle_normal);
        tri_seen.push_back(info.loss_tri);
    };
    uvmap::UVResult res = uvmap::train_global(cloud, cfg);

    REQUIRE(normals_seen.size() == 3);
    for (double x : normals_seen) CHECK(x == 0.0);
    for (double x : tri_seen) CHECK(x == 0.0);
    CHECK(res.final_losses.cycle_normal == 0.0);
    CHECK(res.final_losses.loss_tri == 0.0);

    // point-cloud report: isometric only, over the k-NN graph
    CHECK(res.report.isometric.has_value());
    CHECK(!res.report.conformal.has_value());
    CHECK(!res.report.equiareal.has_value());
    CHECK(!res.report.flipped.has_value());
    CHECK(!res.report.seam_length.has_value());
    CHECK(res.report.faces == 0);
    CHECK(res.report.charts == 1);
    CHECK(res.report.vertices == 16);
}

TEST_CASE("train_global replays bit-identically under a fixed seed") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(4, 4);
    GlobalRunConfig cfg;
    cfg.iterations = 30;
    cfg.seed = 7;
    cfg.progress_every = 0;

    uvmap::UVResult a = uvmap::train_global(mesh, cfg);
    uvmap::UVResult b = uvmap::train_global(mesh, cfg);
    CHECK(bit_equal(a.uv, b.uv));
    CHECK(a.final_losses.loss_total == b.final_losses.loss_total);
    CHECK(a.final_losses.eps == b.final_losses.eps);
    REQUIRE(a.seams.points.size() == b.seams.points.size());
    for (std::size_t i = 0; i < a.seams.points.size(); ++i) {
        CHECK(a.seams.points[i].vertex == b.seams.points[i].vertex);
        CHECK(a.seams.points[i].eta == b.seams.points[i].eta);
    }
    if (a.report.conformal.has_value())
        CHECK(*a.report.conformal == *b.report.conformal);

    cfg.seed = 8;
    uvmap::UVResult c = uvmap::train_global(mesh, cfg);
    CHECK(!bit_equal(a.uv, c.uv));
}

TEST_CASE("the result map is the pointwise evaluation of the trained nets") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(4, 4);
    GlobalRunConfig cfg;
    cfg.iterations = 5;
    cfg.seed = 11;
    uvmap::UVResult res = uvmap::train_global(mesh, cfg);

    // whole-set evaluation
    {
        Tape tape;
        Var q = uvmap::unwrap(tape, res.nets,
                              uvmap::cut(tape, res.nets, tape.constant(mesh.vertices)));
        CHECK(bit_equal(tape.val(q), res.uv));
    }
    // row-by-row evaluation: no cross-point coupling. The GEMM backend may
    // pick a different kernel (and summation order) for a 1-row operand, so
    // this comparison is tight-tolerance rather than bitwise.
    for (std::size_t i : {std::size_t{0}, std::size_t{7}, std::size_t{15}}) {
        Matrix one(1, 3);
        for (int c = 0; c < 3; ++c) one(0, c) = mesh.vertices(i, c);
        Tape tape;
        Var q = uvmap::unwrap(tape, res.nets,
                              uvmap::cut(tape, res.nets, tape.constant(one)));
        CHECK(tape.val(q)(0, 0) == doctest::Approx(res.uv(i, 0)).epsilon(1e-10));
        CHECK(tape.val(q)(0, 1) == doctest::Approx(res.uv(i, 1)).epsilon(1e-10));
    }
}

TEST_CASE("train_global writes a loadable checkpoint of the final weights") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path("ckpt_test_dir");
    fs::create_directories(dir);

    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(3, 3);
    GlobalRunConfig cfg;
    cfg.iterations = 4;
    cfg.seed = 3;
    cfg.checkpoint_dir = dir.string();
    uvmap::UVResult res = uvmap::train_global(mesh, cfg);
    REQUIRE(fs::exists(dir / "checkpoint.bin"));

    Rng rng(99);
    uvmap::GlobalNetworkSet fresh = uvmap::GlobalNetworkSet::create(rng);
    std::vector<uvmap::ParamTensor*> params = fresh.parameters();
    uvmap::load_checkpoint((dir / "checkpoint.bin").string(), params);
    std::vector<uvmap::ParamTensor*> trained = res.nets.parameters();
    REQUIRE(params.size() == trained.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(params[i]->name == trained[i]->name);
        CHECK(bit_equal(params[i]->data, trained[i]->data));
    }

    fs::remove_all(dir);
}

TEST_CASE("training reduces the loss on a flat grid") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(6, 6);
    GlobalRunConfig cfg;
    cfg.iterations = 200;
    cfg.seed = 1;
    cfg.progress_every = 1;
    std::vector<double> totals;
    cfg.on_progress = [&](const uvmap::ProgressInfo& info) {
        totals.push_back(info.loss_total);
    };
    uvmap::train_global(mesh, cfg);
    REQUIRE(totals.size() == 200);

    auto window_mean = [&](std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += totals[i];
        return s / static_cast<double>(hi - lo);
    };
    const double head = window_mean(0, 30);
    const double tail = window_mean(170, 200);
    CHECK(tail < head);
    for (double x : totals) CHECK(std::isfinite(x));
}

// ---------------------------------------------------------------------------
// multi-chart trainer
// ---------------------------------------------------------------------------

TEST_CASE("train_multichart validates its configuration") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(3, 3);
    ChartRunConfig cfg;
    cfg.k_charts = 0;
    CHECK_THROWS_AS(uvmap::train_multichart(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.k_charts = 10;  // exceeds the 9 vertices
    CHECK_THROWS_AS(uvmap::train_multichart(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.iterations = 0;
    CHECK_THROWS_AS(uvmap::train_multichart(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.eps_coef = 0.0;
    CHECK_THROWS_AS(uvmap::train_multichart(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.j_u = 0;
    CHECK_THROWS_AS(uvmap::train_multichart(mesh, cfg), uvmap::ArgumentError);
    cfg = {};
    cfg.lr = 1e-6;
    cfg.lr_min = 1e-3;
    CHECK_THROWS_AS(uvmap::train_multichart(mesh, cfg), uvmap::ArgumentError);
}

TEST_CASE("train_multichart partitions vertices and packs a valid atlas") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(4, 4);
    const std::size_t v = mesh.vertex_count();
    ChartRunConfig cfg;
    cfg.k_charts = 3;
    cfg.iterations = 40;
    cfg.seed = 4;
    cfg.progress_every = 10;
    std::vector<std::size_t> nonempty_seen;
    cfg.on_progress = [&](const uvmap::ChartProgressInfo& info) {
        CHECK(info.total == 40);
        CHECK(std::isfinite(info.loss_total));
        nonempty_seen.push_back(info.charts_nonempty);
    };

    uvmap::ChartResult res = uvmap::train_multichart(mesh, cfg);
    CHECK(!nonempty_seen.empty());

    REQUIRE(res.partition.labels.size() == v);
    REQUIRE(res.partition.members.size() == 3);
    std::size_t member_total = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        member_total += res.partition.members[k].size();
        for (std::size_t i : res.partition.members[k]) {
            CHECK(i < v);
            CHECK(res.partition.labels[i] == k);
        }
    }
    CHECK(member_total == v);

    REQUIRE(res.chart_uv.size() == 3);
    for (const Matrix& m : res.chart_uv) {
        CHECK(m.rows() == v);
        CHECK(m.cols() == 2);
    }
    for (std::size_t i = 0; i < v; ++i) {
        CHECK(res.atlas.uv(i, 0) >= -1e-9);
        CHECK(res.atlas.uv(i, 0) <= 1.0 + 1e-9);
        CHECK(res.atlas.uv(i, 1) >= -1e-9);
        CHECK(res.atlas.uv(i, 1) <= 1.0 + 1e-9);
    }

    CHECK(res.iterations_run == 40);
    CHECK(res.charts_nonempty_final >= 1);
    CHECK(res.charts_nonempty_final <= 3);
    CHECK(res.charts_nonempty_at_90pct >= 1);
    CHECK(res.charts_nonempty_at_90pct <= 3);
    std::size_t nonempty = 0;
    for (const auto& m : res.partition.members)
        if (!m.empty()) ++nonempty;
    CHECK(res.charts_nonempty_final == nonempty);

    CHECK(res.report.charts == static_cast<std::int64_t>(nonempty));
    CHECK(res.report.vertices == static_cast<std::int64_t>(v));
    CHECK(res.report.seam_length.has_value());
    CHECK(res.per_chart.size() == nonempty);
    for (const auto& cm : res.per_chart) CHECK(cm.vertices > 0);

    // the atlas rows come from each vertex's own chart placement
    for (std::size_t i = 0; i < v; ++i) {
        const std::size_t k = res.partition.labels[i];
        const auto& pl = res.atlas.placements[k];
        CHECK(res.atlas.uv(i, 0) == pl.scale * res.chart_uv[k](i, 0) + pl.tx);
        CHECK(res.atlas.uv(i, 1) == pl.scale * res.chart_uv[k](i, 1) + pl.ty);
    }
}

TEST_CASE("train_multichart replays bit-identically under a fixed seed") {
    const uvmap::SurfaceMesh mesh = oracle::grid_mesh(4, 4);
    ChartRunConfig cfg;
    cfg.k_charts = 2;
    cfg.iterations = 25;
    cfg.seed = 6;

    uvmap::ChartResult a = uvmap::train_multichart(mesh, cfg);
    uvmap::ChartResult b = uvmap::train_multichart(mesh, cfg);
    CHECK(a.partition.labels == b.partition.labels);
    CHECK(bit_equal(a.atlas.uv, b.atlas.uv));
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(bit_equal(a.chart_uv[k], b.chart_uv[k]));
    CHECK(a.final_losses.loss_total == b.final_losses.loss_total);
}

TEST_CASE("multichart_forward emits row-stochastic scores and unit normals") {
    Rng rng(905);
    uvmap::MultiChartNetworkSet nets = uvmap::MultiChartNetworkSet::create(4, rng);
    const Matrix p = oracle::random_matrix(rng, 10, 3);

    Tape tape;
    uvmap::MultiChartForward f = uvmap::multichart_forward(tape, nets, tape.constant(p));
    const Matrix& h = tape.val(f.h);
    CHECK(h.rows() == 10);
    CHECK(h.cols() == 512);
    const Matrix& s = tape.val(f.s);
    CHECK(s.rows() == 10);
    CHECK(s.cols() == 4);
    for (std::size_t i = 0; i < 10; ++i) {
        double row = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(s(i, k) > 0.0);
            row += s(i, k);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    }
    REQUIRE(f.q.size() == 4);
    REQUIRE(f.cycle.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(tape.val(f.q[k]).cols() == 2);
        const Matrix& n = tape.val(f.cycle[k].n);
        CHECK(n.cols() == 3);
        for (std::size_t i = 0; i < n.rows(); ++i) {
            const double len = std::sqrt(n(i, 0) * n(i, 0) + n(i, 1) * n(i, 1) +
                                         n(i, 2) * n(i, 2));
            CHECK(len == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("global_forward stacks both wrap passes and checks row alignment") {
    Rng rng(906);
    uvmap::GlobalNetworkSet nets = uvmap::GlobalNetworkSet::create(rng);
    const Matrix p = oracle::random_matrix(rng, 6, 3);
    const Matrix g = uvmap::sample_grid(6);

    Tape tape;
    uvmap::GlobalForward f =
        uvmap::global_forward(tape, nets, tape.constant(g), tape.constant(p));
    CHECK(tape.val(f.qhat).rows() == 6);
    CHECK(tape.val(f.qhat).cols() == 2);
    CHECK(tape.val(f.q).rows() == 6);
    CHECK(tape.val(f.p_hat).cols() == 3);
    CHECK(tape.val(f.qhat_cycle).cols() == 2);
    CHECK(tape.val(f.t1).rows() == 12);  // stacked: branch A rows then branch B
    CHECK(tape.val(f.t2).rows() == 12);
    CHECK(tape.val(f.t1).cols() == 3);

    // at initialization the residual deform is the identity on the lattice
    CHECK(bit_equal(tape.val(f.qhat), g));

    Tape tape2;
    CHECK_THROWS_AS(uvmap::global_forward(tape2, nets, tape2.constant(g),
                                          tape2.constant(oracle::random_matrix(rng, 5, 3))),
                    uvmap::ArgumentError);
}
