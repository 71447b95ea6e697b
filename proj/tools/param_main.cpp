#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "uvmap/checkpoint.hpp"
#include "uvmap/export.hpp"
#include "uvmap/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

using namespace uvmap;

struct Options {
    std::string input;
    std::string out_dir;
    std::string from_manifest;
    std::size_t iterations = 20000;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double lr_min = 1e-5;
    std::size_t k_charts = 8;
    std::size_t j_u = 5;
    std::size_t j_cut = 3;
    double tau_coef = 0.02;
    double eps_coef = 0.2;
    std::string weights_csv;
    bool pointcloud = false;
    std::size_t checkpoint_every = 0;
    std::size_t refresh_every = 10;
    std::size_t progress_every = 100;
    bool mesh_seams = false;
    int threads = 1;
};

std::vector<double> parse_weights(const std::string& csv, std::size_t expected) {
    std::vector<double> out;
    if (csv.empty()) return out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string tok =
            csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ArgumentError("--weights: cannot parse '" + tok + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.size() != expected)
        throw ArgumentError("--weights: expected " + std::to_string(expected) +
                            " comma-separated values");
    return out;
}

void print_progress_global(const ProgressInfo& p) {
    std::fprintf(stderr,
                 "iter=%zu lr=%.10g eps=%.10g tau=%.10g unwrap=%.10g wrap=%.10g "
                 "cycle=%.10g cycle_pos=%.10g cycle_uv=%.10g cycle_normal=%.10g "
                 "diff=%.10g tri=%.10g total=%.10g\n",
                 p.iteration, p.lr, p.eps, p.tau, p.loss_unwrap, p.loss_wrap,
                 p.loss_cycle, p.cycle_position, p.cycle_uv, p.cycle_normal,
                 p.loss_diff, p.loss_tri, p.loss_total);
}

void print_progress_charts(const ChartProgressInfo& p) {
    std::fprintf(stderr,
                 "iter=%zu lr=%.10g hinge=%.10g cycle_pos=%.10g cycle_normal=%.10g "
                 "tri=%.10g total=%.10g charts=%zu\n",
                 p.iteration, p.lr, p.loss_hinge, p.loss_cycle_position,
                 p.loss_cycle_normal, p.loss_tri, p.loss_total, p.charts_nonempty);
}

// Replay: the manifest supplies the entire resolved configuration; the replay
// also reuses the recorded wall time so every output byte matches.
struct ReplayState {
    bool active = false;
    double wall_seconds = 0.0;
};

ReplayState apply_manifest(Options& o, bool charts_mode) {
    ReplayState replay;
    if (o.from_manifest.empty()) return replay;
    const RunManifest m = read_manifest(o.from_manifest);
    const bool manifest_charts = m.mode == "multichart";
    if (manifest_charts != charts_mode)
        throw ArgumentError("manifest mode '" + m.mode +
                            "' does not match this subcommand");
    o.input = m.input_path;
    o.iterations = m.iterations;
    o.seed = m.seed;
    o.lr = m.lr;
    o.lr_min = m.lr_min;
    o.k_charts = m.k_charts;
    o.j_u = m.j_u;
    o.j_cut = m.j_cut;
    o.tau_coef = m.tau_coef;
    o.eps_coef = m.eps_coef;
    o.pointcloud = m.mode == "pointcloud";
    o.checkpoint_every = m.checkpoint_every;
    o.refresh_every = m.refresh_every;
    o.progress_every = m.progress_every;
    o.mesh_seams = m.seam_mesh_neighbors;
    o.threads = m.threads;
    {
        std::string csv;
        for (std::size_t i = 0; i < m.weights.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", m.weights[i]);
            csv += (i ? "," : "");
            csv += buf;
        }
        o.weights_csv = csv;
    }
    if (fnv1a64_file(o.input) != m.input_hash)
        throw ArgumentError("input file changed since the manifest was written: " +
                            o.input);
    replay.active = true;
    replay.wall_seconds = m.wall_seconds;
    return replay;
}

void require_input(const Options& o) {
    if (o.input.empty())
        throw ArgumentError("--input is required (or --from-manifest)");
}

std::string prepare_out_dir(const Options& o) {
    if (o.out_dir.empty()) throw ArgumentError("--out is required");
    fs::create_directories(o.out_dir);
    return o.out_dir;
}

RunManifest base_manifest(const Options& o, const std::string& mode,
                          const std::vector<double>& weights) {
    RunManifest m;
    m.mode = mode;
    m.input_path = o.input;
    m.input_hash = fnv1a64_file(o.input);
    m.seed = o.seed;
    m.iterations = o.iterations;
    m.lr = o.lr;
    m.lr_min = o.lr_min;
    m.k_charts = o.k_charts;
    m.j_u = o.j_u;
    m.j_cut = o.j_cut;
    m.tau_coef = o.tau_coef;
    m.eps_coef = o.eps_coef;
    m.weights = weights;
    m.refresh_every = o.refresh_every;
    m.progress_every = o.progress_every;
    m.checkpoint_every = o.checkpoint_every;
    m.seam_mesh_neighbors = o.mesh_seams;
    m.threads = o.threads;
    return m;
}

// ---------------------------------------------------------------------------
// Per-vertex UV from an exported OBJ
// ---------------------------------------------------------------------------

Matrix per_vertex_uv(const UvMeshFile& file) {
    const std::size_t v = file.vertices.rows();
    Matrix uv(v, 2);
    if (file.faces.empty()) {
        if (file.uvs.rows() != v)
            throw ArgumentError(
                "expected one vt per vertex in a face-free UV file");
        return file.uvs;
    }
    std::vector<std::ptrdiff_t> assigned(v, -1);
    for (std::size_t t = 0; t < file.faces.size(); ++t)
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t vert = file.faces[t][c];
            const std::size_t vt = file.face_uvs[t][c];
            if (assigned[vert] < 0) {
                assigned[vert] = static_cast<std::ptrdiff_t>(vt);
            } else {
                const auto prev = static_cast<std::size_t>(assigned[vert]);
                if (file.uvs(prev, 0) != file.uvs(vt, 0) ||
                    file.uvs(prev, 1) != file.uvs(vt, 1))
                    throw ArgumentError(
                        "vertex has conflicting UVs; per-vertex parameterization "
                        "required");
            }
        }
    for (std::size_t i = 0; i < v; ++i) {
        if (assigned[i] >= 0) {
            uv(i, 0) = file.uvs(static_cast<std::size_t>(assigned[i]), 0);
            uv(i, 1) = file.uvs(static_cast<std::size_t>(assigned[i]), 1);
        } else {
            uv(i, 0) = 0.0;
            uv(i, 1) = 0.0;
        }
    }
    return uv;
}

std::string parent_dir(const std::string& path) {
    const std::string dir = fs::path(path).parent_path().string();
    return dir.empty() ? std::string(".") : dir;
}

std::vector<std::size_t> seam_vertex_ids(const SeamSet& seams) {
    std::vector<std::size_t> ids;
    ids.reserve(seams.points.size());
    for (const auto& sp : seams.points) ids.push_back(sp.vertex);
    return ids;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_global(Options o) {
    const ReplayState replay = apply_manifest(o, false);
    require_input(o);
    const std::string out = prepare_out_dir(o);
    set_compute_threads(o.threads);

    std::vector<double> weights = parse_weights(o.weights_csv, 5);
    GlobalRunConfig cfg;
    cfg.iterations = o.iterations;
    cfg.seed = o.seed;
    cfg.lr = o.lr;
    cfg.lr_min = o.lr_min;
    cfg.j_u = o.j_u;
    cfg.j_cut = o.j_cut;
    cfg.tau_coef = o.tau_coef;
    cfg.eps_coef = o.eps_coef;
    if (!weights.empty())
        cfg.weights = GlobalLossWeights{weights[0], weights[1], weights[2],
                                        weights[3], weights[4]};
    else
        weights = {cfg.weights.alpha_u, cfg.weights.alpha_w, cfg.weights.alpha_c,
                   cfg.weights.alpha_diff, cfg.weights.alpha_tri};
    cfg.point_cloud_mode = o.pointcloud;
    cfg.refresh_every = o.refresh_every;
    cfg.progress_every = o.progress_every;
    cfg.checkpoint_every = o.checkpoint_every;
    cfg.checkpoint_dir = out;
    cfg.seam_mesh_neighbors = o.mesh_seams;
    cfg.on_progress = print_progress_global;

    const std::string stem = fs::path(o.input).stem().string();
    const std::string obj_name = stem + "_uv.obj";

    SurfaceMesh mesh;
    PointSet points;
    UVResult res;
    if (o.pointcloud) {
        points = load_pointcloud(o.input);
        res = train_global(points, cfg);
    } else {
        mesh = load_mesh(o.input);
        res = train_global(mesh, cfg);
    }
    if (replay.active) res.report.wall_seconds = replay.wall_seconds;

    const auto& positions = o.pointcloud ? points.points : mesh.vertices;
    write_uv_obj(out + "/" + obj_name, positions, res.uv, mesh.faces);
    write_seams_json(out + "/seams.json", res.seams);
    write_report_json(out + "/report.json", res.report);
    write_uv_svg(out + "/uv.svg", res.uv, mesh.faces, seam_vertex_ids(res.seams));
    {
        std::map<std::string, std::vector<std::size_t>> channels{
            {"deform.a", res.nets.deform.a.spec.channels},
            {"deform.b", res.nets.deform.b.spec.channels},
            {"wrap.a", res.nets.wrap.a.spec.channels},
            {"wrap.b", res.nets.wrap.b.spec.channels},
            {"cut.a", res.nets.cut.a.spec.channels},
            {"cut.b", res.nets.cut.b.spec.channels},
            {"unwrap", res.nets.unwrap.spec.channels}};
        save_checkpoint_manifest(out + "/checkpoint_manifest.json", channels, o.seed);
    }

    RunManifest m = base_manifest(o, o.pointcloud ? "pointcloud" : "global", weights);
    m.artifacts = {obj_name,  "seams.json",     "report.json",
                   "uv.svg",  "checkpoint.bin", "checkpoint_manifest.json"};
    m.wall_seconds = res.report.wall_seconds;
    write_manifest(out + "/manifest.json", m);

    std::printf("%s: %zu vertices, %zu iterations, %zu seam points\n", stem.c_str(),
                static_cast<std::size_t>(positions.rows()), res.iterations_run,
                res.seams.points.size());
    if (res.report.conformal)
        std::printf("conformal=%.10g\n", *res.report.conformal);
    if (res.report.isometric)
        std::printf("isometric=%.10g\n", *res.report.isometric);
    std::printf("wrote %s\n", (out + "/" + obj_name).c_str());
    return 0;
}

int run_charts(Options o) {
    const ReplayState replay = apply_manifest(o, true);
    require_input(o);
    const std::string out = prepare_out_dir(o);
    set_compute_threads(o.threads);

    std::vector<double> weights = parse_weights(o.weights_csv, 3);
    ChartRunConfig cfg;
    cfg.k_charts = o.k_charts;
    cfg.iterations = o.iterations;
    cfg.seed = o.seed;
    cfg.lr = o.lr;
    cfg.lr_min = o.lr_min;
    cfg.j_u = o.j_u;
    cfg.eps_coef = o.eps_coef;
    if (!weights.empty())
        cfg.weights = ChartLossWeights{weights[0], weights[1], weights[2]};
    else
        weights = {cfg.weights.alpha_u, cfg.weights.alpha_c, cfg.weights.alpha_tri};
    cfg.progress_every = o.progress_every;
    cfg.checkpoint_every = o.checkpoint_every;
    cfg.checkpoint_dir = out;
    cfg.on_progress = print_progress_charts;

    const std::string stem = fs::path(o.input).stem().string();
    const std::string obj_name = stem + "_atlas.obj";

    SurfaceMesh mesh = load_mesh(o.input);
    ChartResult res = train_multichart(mesh, cfg);
    if (replay.active) res.report.wall_seconds = replay.wall_seconds;

    write_uv_obj(out + "/" + obj_name, mesh.vertices, res.atlas.uv, mesh.faces);
    write_charts_json(out + "/charts.json", res.partition, mesh.faces);
    write_report_json(out + "/report.json", res.report, &res.per_chart);
    write_atlas_svg(out + "/atlas.svg", res.atlas.uv, mesh.faces,
                    res.partition.labels, cfg.k_charts);
    {
        std::map<std::string, std::vector<std::size_t>> channels{
            {"embed", res.nets.embed.spec.channels},
            {"assign", res.nets.assign.spec.channels}};
        for (std::size_t k = 0; k < res.nets.charts.size(); ++k) {
            const std::string prefix = "chart" + std::to_string(k);
            channels[prefix + ".unwrap"] = res.nets.charts[k].unwrap.spec.channels;
            channels[prefix + ".wrap.a"] = res.nets.charts[k].wrap.a.spec.channels;
            channels[prefix + ".wrap.b"] = res.nets.charts[k].wrap.b.spec.channels;
        }
        save_checkpoint_manifest(out + "/checkpoint_manifest.json", channels, o.seed);
    }

    RunManifest m = base_manifest(o, "multichart", weights);
    m.artifacts = {obj_name,    "charts.json",    "report.json",
                   "atlas.svg", "checkpoint.bin", "checkpoint_manifest.json"};
    m.wall_seconds = res.report.wall_seconds;
    write_manifest(out + "/manifest.json", m);

    std::printf("%s: %zu vertices, %zu charts in use (of %zu)\n", stem.c_str(),
                mesh.vertex_count(), res.charts_nonempty_final, cfg.k_charts);
    std::printf("wrote %s\n", (out + "/" + obj_name).c_str());
    return 0;
}

int run_eval(Options o) {
    require_input(o);
    const std::string out = o.out_dir.empty() ? parent_dir(o.input) : o.out_dir;
    if (!o.out_dir.empty()) fs::create_directories(o.out_dir);
    const std::string side = parent_dir(o.input);

    UvMeshFile file = load_uv_obj(o.input);
    const Matrix uv = per_vertex_uv(file);
    const std::size_t v = file.vertices.rows();

    // A charts.json sidecar marks the input as a multi-chart atlas: metrics are
    // computed per label with no seam re-extraction, mirroring the exporter.
    // Without it the input is a single global map and seams come from the UVs.
    std::vector<std::size_t> labels(v, 0);
    const bool is_atlas = [&] {
        auto loaded = read_chart_labels(side + "/charts.json", v);
        if (loaded) labels = *loaded;
        return loaded.has_value();
    }();

    DistortionReport rep;
    std::vector<ChartMetrics> per_chart;
    if (!file.faces.empty()) {
        std::vector<std::size_t> seam_ids;
        if (!is_atlas && v > 1) {
            const DynamicThresholds thr =
                compute_thresholds(uv, o.eps_coef, o.tau_coef);
            const std::size_t j_cut = std::min(o.j_cut, v - 1);
            const SeamSet seams =
                o.mesh_seams
                    ? extract_seams_mesh(
                          SurfaceMesh{file.vertices, file.faces, Matrix()}, uv,
                          thr.tau)
                    : extract_seams(file.vertices, uv, thr.tau, j_cut);
            seam_ids = seam_vertex_ids(seams);
        }
        SurfaceMesh mesh{file.vertices, file.faces, Matrix()};
        rep = evaluate(mesh, uv, labels, seam_ids);
        if (is_atlas) per_chart = per_chart_metrics(mesh, uv, labels);
    } else {
        rep = evaluate_pointcloud(file.vertices, uv);
    }
    if (auto meta = read_report_meta(side + "/report.json")) {
        rep.iterations = meta->iterations;
        rep.wall_seconds = meta->wall_seconds;
        rep.seed = meta->seed;
    }
    write_report_json(out + "/report.json", rep,
                      per_chart.empty() ? nullptr : &per_chart);

    if (rep.conformal) std::printf("conformal=%.10g\n", *rep.conformal);
    if (rep.isometric) std::printf("isometric=%.10g\n", *rep.isometric);
    std::printf("wrote %s\n", (out + "/report.json").c_str());
    return 0;
}

int run_seams(Options o) {
    require_input(o);
    const std::string out = o.out_dir.empty() ? parent_dir(o.input) : o.out_dir;
    if (!o.out_dir.empty()) fs::create_directories(o.out_dir);

    UvMeshFile file = load_uv_obj(o.input);
    const Matrix uv = per_vertex_uv(file);
    const std::size_t v = file.vertices.rows();
    if (v < 2) throw ArgumentError("seam extraction needs at least 2 vertices");

    const DynamicThresholds thr = compute_thresholds(uv, o.eps_coef, o.tau_coef);
    const SeamSet seams =
        o.mesh_seams && !file.faces.empty()
            ? extract_seams_mesh(SurfaceMesh{file.vertices, file.faces, Matrix()},
                                 uv, thr.tau)
            : extract_seams(file.vertices, uv, thr.tau, std::min(o.j_cut, v - 1));
    write_seams_json(out + "/seams.json", seams);

    std::printf("%zu seam points (tau=%.10g)\n", seams.points.size(), seams.tau);
    std::printf("wrote %s\n", (out + "/seams.json").c_str());
    return 0;
}

void add_common_train_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--input", o.input, "input mesh or point cloud");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--from-manifest", o.from_manifest,
                    "replay a previous run from its manifest");
    cmd->add_option("--iters", o.iterations, "training iterations");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--lr", o.lr, "peak learning rate");
    cmd->add_option("--lr-min", o.lr_min, "final learning rate");
    cmd->add_option("--ju", o.j_u, "UV-space repulsion neighbors");
    cmd->add_option("--eps-coef", o.eps_coef, "ε coefficient for the hinge margin");
    cmd->add_option("--checkpoint-every", o.checkpoint_every,
                    "checkpoint period in iterations (0 = final only)");
    cmd->add_option("--progress-every", o.progress_every,
                    "progress line period (0 = final only)");
    cmd->add_option("--threads", o.threads, "matmul threads");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neural UV parameterization"};
    app.require_subcommand(1);

    Options og, oc, oe, os;

    CLI::App* global = app.add_subcommand("global", "single-chart parameterization");
    add_common_train_flags(global, og);
    global->add_option("--jcut", og.j_cut, "3D neighbors for seam detection");
    global->add_option("--tau-coef", og.tau_coef, "τ coefficient for seam detection");
    global->add_option("--weights", og.weights_csv,
                       "loss weights a,b,c,d,e (unwrap,wrap,cycle,diff,tri)");
    global->add_flag("--pointcloud", og.pointcloud,
                     "treat the input as a point cloud");
    global->add_option("--refresh-every", og.refresh_every,
                       "k-NN table refresh period");
    global->add_flag("--mesh-seams", og.mesh_seams,
                     "seam detection over mesh one-rings instead of 3D k-NN");

    CLI::App* charts = app.add_subcommand("charts", "multi-chart atlas");
    add_common_train_flags(charts, oc);
    charts->add_option("-K,--charts", oc.k_charts, "number of charts");
    charts->add_option("--weights", oc.weights_csv,
                       "loss weights a,b,c (hinge,cycle,tri)");

    CLI::App* eval = app.add_subcommand("eval", "evaluate an exported UV OBJ");
    eval->add_option("--input", oe.input, "UV OBJ to evaluate")->required();
    eval->add_option("--out", oe.out_dir, "output directory (default: input's)");
    eval->add_option("--jcut", oe.j_cut, "3D neighbors for seam detection");
    eval->add_option("--tau-coef", oe.tau_coef, "τ coefficient for seam detection");
    eval->add_option("--eps-coef", oe.eps_coef, "ε coefficient (bbox scale)");
    eval->add_flag("--mesh-seams", oe.mesh_seams, "one-ring seam detection");

    CLI::App* seams = app.add_subcommand("seams", "extract seams from a UV OBJ");
    seams->add_option("--input", os.input, "UV OBJ to scan")->required();
    seams->add_option("--out", os.out_dir, "output directory (default: input's)");
    seams->add_option("--jcut", os.j_cut, "3D neighbors for seam detection");
    seams->add_option("--tau-coef", os.tau_coef, "τ coefficient");
    seams->add_option("--eps-coef", os.eps_coef, "ε coefficient (bbox scale)");
    seams->add_flag("--mesh-seams", os.mesh_seams, "one-ring seam detection");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (global->parsed()) return run_global(og);
        if (charts->parsed()) return run_charts(oc);
        if (eval->parsed()) return run_eval(oe);
        if (seams->parsed()) return run_seams(os);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
