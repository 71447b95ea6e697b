#include "uvmap/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

namespace uvmap {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps line endings LF
    if (!out) throw FormatError("cannot open for writing: " + path);
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw FormatError("write failed: " + path);
}

void write_json(const std::string& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// %.17g — enough digits that strtod recovers the exact double
std::string fmt_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_svg(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", x);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// OBJ
// ---------------------------------------------------------------------------

void write_uv_obj(const std::string& path, const Matrix& vertices, const Matrix& uv,
                  const std::vector<std::array<std::size_t, 3>>& faces) {
    if (vertices.cols() != 3 || uv.cols() != 2 || uv.rows() != vertices.rows())
        throw ArgumentError("write_uv_obj: need V×3 positions and V×2 UVs");
    for (const auto& f : faces)
        for (std::size_t c : f)
            if (c >= vertices.rows())
                throw ArgumentError("write_uv_obj: face index out of range");

    auto out = open_out(path);
    out << "# " << vertices.rows() << " vertices, " << faces.size() << " faces\n";
    for (std::size_t i = 0; i < vertices.rows(); ++i)
        out << "v " << fmt_full(vertices(i, 0)) << ' ' << fmt_full(vertices(i, 1))
            << ' ' << fmt_full(vertices(i, 2)) << '\n';
    for (std::size_t i = 0; i < uv.rows(); ++i)
        out << "vt " << fmt_full(uv(i, 0)) << ' ' << fmt_full(uv(i, 1)) << '\n';
    for (const auto& f : faces)
        out << "f " << f[0] + 1 << '/' << f[0] + 1 << ' ' << f[1] + 1 << '/'
            << f[1] + 1 << ' ' << f[2] + 1 << '/' << f[2] + 1 << '\n';
    finish(out, path);
}

// ---------------------------------------------------------------------------
// JSON artifacts
// ---------------------------------------------------------------------------

void write_seams_json(const std::string& path, const SeamSet& seams) {
    json pts = json::array();
    for (const auto& sp : seams.points)
        pts.push_back({{"eta", sp.eta}, {"vertex", sp.vertex}});
    write_json(path, json{{"seams", pts}, {"tau", seams.tau}});
}

void write_report_json(const std::string& path, const DistortionReport& rep,
                       const std::vector<ChartMetrics>* per_chart) {
    auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
    json j{{"charts", rep.charts},
           {"conformal", opt(rep.conformal)},
           {"equiareal", opt(rep.equiareal)},
           {"faces", rep.faces},
           {"flipped", opt(rep.flipped)},
           {"isometric", opt(rep.isometric)},
           {"iterations", rep.iterations},
           {"seam_length", opt(rep.seam_length)},
           {"seed", rep.seed},
           {"vertices", rep.vertices},
           {"wall_seconds", rep.wall_seconds}};
    if (per_chart != nullptr) {
        json arr = json::array();
        for (const auto& m : *per_chart)
            arr.push_back({{"chart", m.chart},
                           {"conformal", m.conformal},
                           {"flipped", m.flipped},
                           {"triangles", m.triangles},
                           {"vertices", m.vertices}});
        j["per_chart"] = arr;
    }
    write_json(path, j);
}

std::optional<ReportMeta> read_report_meta(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) return std::nullopt;
    probe.close();
    json j = load_json(path);
    if (!j.contains("iterations") || !j.contains("wall_seconds") || !j.contains("seed"))
        return std::nullopt;
    try {
        ReportMeta meta;
        meta.iterations = j["iterations"].get<std::int64_t>();
        meta.wall_seconds = j["wall_seconds"].get<double>();
        meta.seed = j["seed"].get<std::uint64_t>();
        return meta;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_charts_json(const std::string& path, const ChartPartition& partition,
                       const std::vector<std::array<std::size_t, 3>>& faces) {
    json face_charts = json::array();
    for (const auto& f : faces) {
        const std::size_t la = partition.labels[f[0]];
        const std::size_t lb = partition.labels[f[1]];
        const std::size_t lc = partition.labels[f[2]];
        std::size_t id;
        if (la == lb || la == lc)
            id = la;
        else if (lb == lc)
            id = lb;
        else
            id = std::min({la, lb, lc});
        face_charts.push_back(id);
    }
    write_json(path, json{{"face_charts", face_charts}, {"labels", partition.labels}});
}

std::optional<std::vector<std::size_t>> read_chart_labels(const std::string& path,
                                                          std::size_t vertex_count) {
    std::ifstream probe(path);
    if (!probe) return std::nullopt;
    probe.close();
    json j = load_json(path);
    try {
        auto labels = j.at("labels").get<std::vector<std::size_t>>();
        if (labels.size() != vertex_count)
            throw FormatError(path + ": label count does not match the mesh");
        return labels;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

struct SvgFrame {
    double lo0 = 0.0, lo1 = 0.0, scale = 1.0, height = 0.0;
    static constexpr double kMargin = 20.0;

    explicit SvgFrame(const Matrix& uv) {
        double hi0 = 0.0, hi1 = 0.0;
        if (uv.rows() > 0) {
            lo0 = hi0 = uv(0, 0);
            lo1 = hi1 = uv(0, 1);
            for (std::size_t i = 1; i < uv.rows(); ++i) {
                lo0 = std::min(lo0, uv(i, 0));
                hi0 = std::max(hi0, uv(i, 0));
                lo1 = std::min(lo1, uv(i, 1));
                hi1 = std::max(hi1, uv(i, 1));
            }
        }
        const double extent = std::max({hi0 - lo0, hi1 - lo1, 1e-9});
        scale = (1000.0 - 2.0 * kMargin) / extent;
        height = (hi1 - lo1) * scale + 2.0 * kMargin;
    }

    [[nodiscard]] double x(double u) const { return kMargin + (u - lo0) * scale; }
    [[nodiscard]] double y(double v) const {
        return height - (kMargin + (v - lo1) * scale);  // SVG y grows downward
    }
    [[nodiscard]] double width() const { return 1000.0; }
};

std::string chart_color(std::size_t k) {
    // evenly spread hues via the golden angle
    const double h = std::fmod(137.50776405003785 * static_cast<double>(k), 360.0) / 60.0;
    const double s = 0.62, v = 0.86;
    const double c = v * s;
    const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    const double m = v - c;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                  static_cast<int>(std::lround(255.0 * (r + m))),
                  static_cast<int>(std::lround(255.0 * (g + m))),
                  static_cast<int>(std::lround(255.0 * (b + m))));
    return buf;
}

void svg_header(std::ofstream& out, const SvgFrame& frame) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << fmt_svg(frame.width()) << "\" height=\"" << fmt_svg(frame.height)
        << "\" viewBox=\"0 0 " << fmt_svg(frame.width()) << ' '
        << fmt_svg(frame.height) << "\">\n";
}

void svg_triangle(std::ofstream& out, const SvgFrame& frame, const Matrix& uv,
                  const std::array<std::size_t, 3>& f, const std::string& fill) {
    out << "<polygon points=\"";
    for (std::size_t c = 0; c < 3; ++c) {
        if (c > 0) out << ' ';
        out << fmt_svg(frame.x(uv(f[c], 0))) << ',' << fmt_svg(frame.y(uv(f[c], 1)));
    }
    out << "\" fill=\"" << fill << "\" stroke=\"#2b2b2b\" stroke-width=\"0.3\"/>\n";
}

}  // namespace

void write_uv_svg(const std::string& path, const Matrix& uv,
                  const std::vector<std::array<std::size_t, 3>>& faces,
                  const std::vector<std::size_t>& seam_vertices) {
    SvgFrame frame(uv);
    auto out = open_out(path);
    svg_header(out, frame);
    if (faces.empty()) {
        for (std::size_t i = 0; i < uv.rows(); ++i)
            out << "<circle cx=\"" << fmt_svg(frame.x(uv(i, 0))) << "\" cy=\""
                << fmt_svg(frame.y(uv(i, 1))) << "\" r=\"1.2\" fill=\"#47618a\"/>\n";
    } else {
        for (const auto& f : faces) svg_triangle(out, frame, uv, f, "#dfe7f0");
    }
    for (std::size_t i : seam_vertices)
        out << "<circle cx=\"" << fmt_svg(frame.x(uv(i, 0))) << "\" cy=\""
            << fmt_svg(frame.y(uv(i, 1))) << "\" r=\"2.5\" fill=\"#d03a3a\"/>\n";
    out << "</svg>\n";
    finish(out, path);
}

void write_atlas_svg(const std::string& path, const Matrix& uv,
                     const std::vector<std::array<std::size_t, 3>>& faces,
                     const std::vector<std::size_t>& labels, std::size_t k_count) {
    std::vector<std::string> palette(std::max<std::size_t>(k_count, 1));
    for (std::size_t k = 0; k < palette.size(); ++k) palette[k] = chart_color(k);

    SvgFrame frame(uv);
    auto out = open_out(path);
    svg_header(out, frame);
    for (const auto& f : faces) {
        const std::size_t la = labels[f[0]], lb = labels[f[1]], lc = labels[f[2]];
        std::size_t id;
        if (la == lb || la == lc)
            id = la;
        else if (lb == lc)
            id = lb;
        else
            id = std::min({la, lb, lc});
        svg_triangle(out, frame, uv, f, palette[id % palette.size()]);
    }
    out << "</svg>\n";
    finish(out, path);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    json j{{"artifacts", m.artifacts},
           {"config",
            {{"checkpoint_every", m.checkpoint_every},
             {"eps_coef", m.eps_coef},
             {"iterations", m.iterations},
             {"j_cut", m.j_cut},
             {"j_u", m.j_u},
             {"k_charts", m.k_charts},
             {"lr", m.lr},
             {"lr_min", m.lr_min},
             {"progress_every", m.progress_every},
             {"refresh_every", m.refresh_every},
             {"seam_mesh_neighbors", m.seam_mesh_neighbors},
             {"tau_coef", m.tau_coef},
             {"threads", m.threads},
             {"weights", m.weights}}},
           {"input", {{"fnv1a64", m.input_hash}, {"path", m.input_path}}},
           {"mode", m.mode},
           {"seed", m.seed},
           {"tool_version", m.tool_version},
           {"wall_seconds", m.wall_seconds}};
    write_json(path, j);
}

RunManifest read_manifest(const std::string& path) {
    json j = load_json(path);
    try {
        RunManifest m;
        m.tool_version = j.at("tool_version").get<std::string>();
        m.mode = j.at("mode").get<std::string>();
        m.input_path = j.at("input").at("path").get<std::string>();
        m.input_hash = j.at("input").at("fnv1a64").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.wall_seconds = j.at("wall_seconds").get<double>();
        m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
        const json& c = j.at("config");
        m.iterations = c.at("iterations").get<std::size_t>();
        m.lr = c.at("lr").get<double>();
        m.lr_min = c.at("lr_min").get<double>();
        m.k_charts = c.at("k_charts").get<std::size_t>();
        m.j_u = c.at("j_u").get<std::size_t>();
        m.j_cut = c.at("j_cut").get<std::size_t>();
        m.tau_coef = c.at("tau_coef").get<double>();
        m.eps_coef = c.at("eps_coef").get<double>();
        m.weights = c.at("weights").get<std::vector<double>>();
        m.refresh_every = c.at("refresh_every").get<std::size_t>();
        m.progress_every = c.at("progress_every").get<std::size_t>();
        m.checkpoint_every = c.at("checkpoint_every").get<std::size_t>();
        m.seam_mesh_neighbors = c.at("seam_mesh_neighbors").get<bool>();
        m.threads = c.at("threads").get<int>();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace uvmap
