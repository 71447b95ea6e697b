#include "uvmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uvmap/common.hpp"

namespace uvmap {
namespace {

// ---------------------------------------------------------------------------
// parsing helpers
// ---------------------------------------------------------------------------

double parse_double(const std::string& tok, std::size_t line_no, const char* what) {
    const char* s = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || !std::isfinite(v))
        throw FormatError("line " + std::to_string(line_no) + ": bad " + what + " \"" +
                          tok + "\"");
    return v;
}

long parse_long(const std::string& tok, std::size_t line_no, const char* what) {
    const char* s = tok.c_str();
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0')
        throw FormatError("line " + std::to_string(line_no) + ": bad " + what + " \"" +
                          tok + "\"");
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

// OBJ index: 1-based, negative counts back from the current end; 0 is invalid.
std::size_t resolve_obj_index(long raw, std::size_t count, std::size_t line_no,
                              const char* what) {
    if (raw == 0)
        throw FormatError("line " + std::to_string(line_no) + ": " + what +
                          " index 0 (OBJ indices are 1-based)");
    long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
    if (idx < 0 || idx >= static_cast<long>(count))
        throw FormatError("line " + std::to_string(line_no) + ": " + what + " index " +
                          std::to_string(raw) + " out of range");
    return static_cast<std::size_t>(idx);
}

struct ObjData {
    std::vector<std::array<double, 3>> v;
    std::vector<std::array<double, 3>> vn;
    std::vector<std::array<double, 2>> vt;
    // resolved 0-based corner indices
    std::vector<std::array<std::size_t, 3>> faces;
    std::vector<std::array<long, 3>> face_uvs;  // -1 when the corner has no vt
};

ObjData parse_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open " + path);
    ObjData d;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty() || tok[0][0] == '#') continue;
        if (tok[0] == "v") {
            if (tok.size() != 4 && tok.size() != 5)
                throw FormatError("line " + std::to_string(line_no) +
                                  ": vertex needs 3 coordinates");
            d.v.push_back({parse_double(tok[1], line_no, "coordinate"),
                           parse_double(tok[2], line_no, "coordinate"),
                           parse_double(tok[3], line_no, "coordinate")});
        } else if (tok[0] == "vn") {
            if (tok.size() != 4)
                throw FormatError("line " + std::to_string(line_no) +
                                  ": normal needs 3 components");
            d.vn.push_back({parse_double(tok[1], line_no, "normal"),
                            parse_double(tok[2], line_no, "normal"),
                            parse_double(tok[3], line_no, "normal")});
        } else if (tok[0] == "vt") {
            if (tok.size() < 3)
                throw FormatError("line " + std::to_string(line_no) +
                                  ": texture coordinate needs 2 components");
            d.vt.push_back({parse_double(tok[1], line_no, "uv"),
                            parse_double(tok[2], line_no, "uv")});
        } else if (tok[0] == "f") {
            if (tok.size() < 4)
                throw FormatError("line " + std::to_string(line_no) +
                                  ": face needs at least 3 corners");
            std::vector<std::size_t> corner_v;
            std::vector<long> corner_vt;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                // forms: v | v/vt | v//vn | v/vt/vn
                const std::string& ref = tok[i];
                std::array<std::string, 3> part;
                std::size_t field = 0;
                for (char ch : ref) {
                    if (ch == '/') {
                        if (++field > 2)
                            throw FormatError("line " + std::to_string(line_no) +
                                              ": malformed face corner \"" + ref + "\"");
                    } else {
                        part[field] += ch;
                    }
                }
                if (part[0].empty())
                    throw FormatError("line " + std::to_string(line_no) +
                                      ": malformed face corner \"" + ref + "\"");
                corner_v.push_back(resolve_obj_index(
                    parse_long(part[0], line_no, "vertex"), d.v.size(), line_no, "vertex"));
                if (!part[1].empty())
                    corner_vt.push_back(static_cast<long>(resolve_obj_index(
                        parse_long(part[1], line_no, "uv"), d.vt.size(), line_no, "uv")));
                else
                    corner_vt.push_back(-1);
                if (!part[2].empty())
                    resolve_obj_index(parse_long(part[2], line_no, "normal"), d.vn.size(),
                                      line_no, "normal");
            }
            for (std::size_t i = 1; i + 1 < corner_v.size(); ++i) {
                d.faces.push_back({corner_v[0], corner_v[i], corner_v[i + 1]});
                d.face_uvs.push_back({corner_vt[0], corner_vt[i], corner_vt[i + 1]});
            }
        }
        // other record types (o, g, s, usemtl, mtllib, ...) are ignored
    }
    return d;
}

Matrix to_matrix3(const std::vector<std::array<double, 3>>& rows) {
    Matrix m(rows.size(), 3);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < 3; ++c) m(i, c) = rows[i][c];
    return m;
}

double face_area(const Matrix& v, const std::array<std::size_t, 3>& f) {
    const double* a = v.row(f[0]);
    const double* b = v.row(f[1]);
    const double* c = v.row(f[2]);
    const double e1[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double cx = e1[1] * e2[2] - e1[2] * e2[1];
    const double cy = e1[2] * e2[0] - e1[0] * e2[2];
    const double cz = e1[0] * e2[1] - e1[1] * e2[0];
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

void unit_rows_or_z(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        const double n = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
        if (n < 1e-12) {
            row[0] = row[1] = 0.0;
            row[2] = 1.0;
        } else {
            row[0] /= n;
            row[1] /= n;
            row[2] /= n;
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// loading
// ---------------------------------------------------------------------------

SurfaceMesh load_mesh(const std::string& path) {
    ObjData d = parse_obj(path);
    if (d.v.empty()) throw DegenerateInputError(path + ": no vertices");

    SurfaceMesh mesh;
    mesh.vertices = to_matrix3(d.v);
    for (const auto& f : d.faces)
        if (f[0] != f[1] && f[1] != f[2] && f[0] != f[2]) mesh.faces.push_back(f);

    normalize_points_inplace(mesh.vertices);
    std::erase_if(mesh.faces, [&](const std::array<std::size_t, 3>& f) {
        return face_area(mesh.vertices, f) < 1e-12;
    });

    if (d.vn.size() == d.v.size()) {
        mesh.normals = to_matrix3(d.vn);
        unit_rows_or_z(mesh.normals);
    } else {
        mesh.normals = compute_vertex_normals(mesh.vertices, mesh.faces);
    }
    return mesh;
}

namespace {

PointSet parse_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open " + path);
    std::vector<std::array<double, 3>> pts, nrm;
    std::string line;
    std::size_t line_no = 0;
    bool saw_normals = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty() || tok[0][0] == '#') continue;
        if (tok.size() != 3 && tok.size() != 6)
            throw FormatError("line " + std::to_string(line_no) +
                              ": expected 3 or 6 values per point");
        pts.push_back({parse_double(tok[0], line_no, "coordinate"),
                       parse_double(tok[1], line_no, "coordinate"),
                       parse_double(tok[2], line_no, "coordinate")});
        if (tok.size() == 6) {
            if (nrm.size() + 1 != pts.size())
                throw FormatError("line " + std::to_string(line_no) +
                                  ": mixed points with and without normals");
            saw_normals = true;
            nrm.push_back({parse_double(tok[3], line_no, "normal"),
                           parse_double(tok[4], line_no, "normal"),
                           parse_double(tok[5], line_no, "normal")});
        } else if (saw_normals) {
            throw FormatError("line " + std::to_string(line_no) +
                              ": mixed points with and without normals");
        }
    }
    PointSet ps;
    ps.points = to_matrix3(pts);
    if (saw_normals && nrm.size() == pts.size()) {
        ps.normals = to_matrix3(nrm);
        unit_rows_or_z(ps.normals);
    }
    return ps;
}

std::size_t ply_type_size(const std::string& t, const std::string& path) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
    throw FormatError(path + ": unsupported PLY property type \"" + t + "\"");
}

PointSet parse_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw FormatError(path + ": not a PLY file");

    std::size_t vertex_count = 0;
    bool in_vertex_element = false, header_done = false, format_ok = false;
    struct Prop {
        std::string name;
        std::size_t size = 0, offset = 0;
        bool is_double = false;
    };
    std::vector<Prop> props;
    std::size_t record_size = 0;
    std::size_t line_no = 1;
    while (!header_done && std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::vector<std::string> tok = split_ws(line);
        if (tok.empty() || tok[0] == "comment") continue;
        if (tok[0] == "format") {
            if (tok.size() < 2 || tok[1] != "binary_little_endian")
                throw FormatError(path + ": only binary_little_endian PLY is supported");
            format_ok = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3)
                throw FormatError("line " + std::to_string(line_no) + ": bad element");
            in_vertex_element = tok[1] == "vertex";
            if (in_vertex_element)
                vertex_count =
                    static_cast<std::size_t>(parse_long(tok[2], line_no, "count"));
        } else if (tok[0] == "property" && in_vertex_element) {
            if (tok.size() == 3) {
                Prop p;
                p.size = ply_type_size(tok[1], path);
                p.is_double = tok[1] == "double" || tok[1] == "float64";
                p.name = tok[2];
                p.offset = record_size;
                record_size += p.size;
                props.push_back(p);
            } else {
                throw FormatError(path + ": list properties on vertices are unsupported");
            }
        } else if (tok[0] == "end_header") {
            header_done = true;
        }
    }
    if (!header_done || !format_ok) throw FormatError(path + ": truncated PLY header");
    if (vertex_count == 0) throw DegenerateInputError(path + ": no vertices");

    auto find_prop = [&](const char* name) -> const Prop* {
        for (const Prop& p : props)
            if (p.name == name) return &p;
        return nullptr;
    };
    const Prop* px = find_prop("x");
    const Prop* py = find_prop("y");
    const Prop* pz = find_prop("z");
    if (!px || !py || !pz) throw FormatError(path + ": PLY lacks x/y/z properties");
    const Prop* pnx = find_prop("nx");
    const Prop* pny = find_prop("ny");
    const Prop* pnz = find_prop("nz");
    const bool has_n = pnx && pny && pnz;

    auto read_val = [&](const char* rec, const Prop& p) -> double {
        if (p.is_double) {
            double v;
            std::memcpy(&v, rec + p.offset, 8);
            return v;
        }
        if (p.size != 4)
            throw FormatError(path + ": coordinate property must be float or double");
        float v;
        std::memcpy(&v, rec + p.offset, 4);
        return static_cast<double>(v);
    };

    std::vector<char> rec(record_size);
    PointSet ps;
    ps.points.resize(vertex_count, 3);
    if (has_n) ps.normals.resize(vertex_count, 3);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        in.read(rec.data(), static_cast<std::streamsize>(record_size));
        if (!in) throw FormatError(path + ": truncated PLY payload");
        ps.points(i, 0) = read_val(rec.data(), *px);
        ps.points(i, 1) = read_val(rec.data(), *py);
        ps.points(i, 2) = read_val(rec.data(), *pz);
        if (has_n) {
            ps.normals(i, 0) = read_val(rec.data(), *pnx);
            ps.normals(i, 1) = read_val(rec.data(), *pny);
            ps.normals(i, 2) = read_val(rec.data(), *pnz);
        }
    }
    if (has_n) unit_rows_or_z(ps.normals);
    return ps;
}

}  // namespace

PointSet load_pointcloud(const std::string& path) {
    PointSet ps;
    const bool is_ply =
        path.size() >= 4 && path.compare(path.size() - 4, 4, ".ply") == 0;
    ps = is_ply ? parse_ply(path) : parse_xyz(path);
    if (ps.size() == 0) throw DegenerateInputError(path + ": no points");
    for (std::size_t i = 0; i < ps.points.size(); ++i)
        if (!std::isfinite(ps.points.data()[i]))
            throw FormatError(path + ": non-finite coordinate");
    normalize_points_inplace(ps.points);
    return ps;
}

UvMeshFile load_uv_obj(const std::string& path) {
    ObjData d = parse_obj(path);
    if (d.v.empty()) throw DegenerateInputError(path + ": no vertices");
    if (d.vt.empty()) throw ArgumentError(path + ": no vt records (not a UV OBJ)");
    UvMeshFile out;
    out.vertices = to_matrix3(d.v);
    out.uvs.resize(d.vt.size(), 2);
    for (std::size_t i = 0; i < d.vt.size(); ++i) {
        out.uvs(i, 0) = d.vt[i][0];
        out.uvs(i, 1) = d.vt[i][1];
    }
    for (std::size_t f = 0; f < d.faces.size(); ++f) {
        const auto& uv = d.face_uvs[f];
        if (uv[0] < 0 || uv[1] < 0 || uv[2] < 0)
            throw ArgumentError(path + ": face without vt indices (incomplete UV map)");
        out.faces.push_back(d.faces[f]);
        out.face_uvs.push_back({static_cast<std::size_t>(uv[0]),
                                static_cast<std::size_t>(uv[1]),
                                static_cast<std::size_t>(uv[2])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

Matrix compute_vertex_normals(const Matrix& vertices,
                              const std::vector<std::array<std::size_t, 3>>& faces) {
    Matrix normals(vertices.rows(), 3);
    for (const auto& f : faces) {
        const double* a = vertices.row(f[0]);
        const double* b = vertices.row(f[1]);
        const double* c = vertices.row(f[2]);
        const double e1[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        const double e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
        // cross product length = 2·area, so accumulating it is area weighting
        const double cr[3] = {e1[1] * e2[2] - e1[2] * e2[1],
                              e1[2] * e2[0] - e1[0] * e2[2],
                              e1[0] * e2[1] - e1[1] * e2[0]};
        for (std::size_t corner = 0; corner < 3; ++corner) {
            double* row = normals.row(f[corner]);
            row[0] += cr[0];
            row[1] += cr[1];
            row[2] += cr[2];
        }
    }
    unit_rows_or_z(normals);
    return normals;
}

void normalize_points_inplace(Matrix& points) {
    if (points.rows() == 0) throw DegenerateInputError("normalize: empty point set");
    double lo[3], hi[3];
    for (std::size_t c = 0; c < 3; ++c) lo[c] = hi[c] = points(0, c);
    for (std::size_t r = 1; r < points.rows(); ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], points(r, c));
            hi[c] = std::max(hi[c], points(r, c));
        }
    const double extent =
        std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
    if (extent <= 0.0)
        throw DegenerateInputError("normalize: all points are identical");
    const double inv = 1.0 / extent;
    const double center[3] = {(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0,
                              (lo[2] + hi[2]) / 2.0};
    for (std::size_t r = 0; r < points.rows(); ++r)
        for (std::size_t c = 0; c < 3; ++c)
            points(r, c) = (points(r, c) - center[c]) * inv;
}

SurfaceMesh normalize(SurfaceMesh mesh) {
    normalize_points_inplace(mesh.vertices);
    return mesh;
}

PointSet normalize(PointSet points) {
    normalize_points_inplace(points.points);
    return points;
}

// ---------------------------------------------------------------------------
// k-NN — exact kd-tree, (distance, index) tie order
// ---------------------------------------------------------------------------

namespace {

struct KdNode {
    std::size_t point = 0;
    int axis = -1;  // -1 marks a leaf
    int left = -1, right = -1;
};

class KdTree {
public:
    KdTree(const Matrix& pts, std::size_t dim) : pts_(pts), dim_(dim) {
        perm_.resize(pts.rows());
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        nodes_.reserve(pts.rows());
        root_ = build(0, pts.rows());
    }

    // k best (d², index) pairs, ascending
    void query(const double* q, std::size_t k, std::size_t exclude,
               std::vector<std::pair<double, std::size_t>>& heap) const {
        heap.clear();
        k_ = k;
        exclude_ = exclude;
        search(root_, q, heap);
        std::sort(heap.begin(), heap.end());
    }

private:
    int build(std::size_t lo, std::size_t hi) {
        if (lo >= hi) return -1;
        // split on the widest axis for balanced pruning
        double spread_best = -1.0;
        int axis = 0;
        for (std::size_t c = 0; c < dim_; ++c) {
            double mn = pts_(perm_[lo], c), mx = mn;
            for (std::size_t i = lo + 1; i < hi; ++i) {
                mn = std::min(mn, pts_(perm_[i], c));
                mx = std::max(mx, pts_(perm_[i], c));
            }
            if (mx - mn > spread_best) {
                spread_best = mx - mn;
                axis = static_cast<int>(c);
            }
        }
        const std::size_t mid = (lo + hi) / 2;
        std::nth_element(perm_.begin() + lo, perm_.begin() + mid, perm_.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             const double va = pts_(a, axis), vb = pts_(b, axis);
                             return va < vb || (va == vb && a < b);
                         });
        KdNode node;
        node.point = perm_[mid];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        nodes_[self].left = build(lo, mid);
        nodes_[self].right = build(mid + 1, hi);
        return self;
    }

    [[nodiscard]] double dist2(const double* q, std::size_t p) const {
        double s = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) {
            const double d = q[c] - pts_(p, c);
            s += d * d;
        }
        return s;
    }

    // max-heap ordering on (d², index): the worst candidate sits on top
    static bool heap_less(const std::pair<double, std::size_t>& a,
                          const std::pair<double, std::size_t>& b) {
        return a < b;
    }

    void offer(std::vector<std::pair<double, std::size_t>>& heap, double d2,
               std::size_t idx) const {
        const std::pair<double, std::size_t> cand{d2, idx};
        if (heap.size() < k_) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), heap_less);
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end(), heap_less);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), heap_less);
        }
    }

    void search(int ni, const double* q,
                std::vector<std::pair<double, std::size_t>>& heap) const {
        if (ni < 0) return;
        const KdNode& n = nodes_[ni];
        if (n.point != exclude_) offer(heap, dist2(q, n.point), n.point);
        const double delta = q[n.axis] - pts_(n.point, n.axis);
        const int near = delta < 0.0 ? n.left : n.right;
        const int far = delta < 0.0 ? n.right : n.left;
        search(near, q, heap);
        // equal-distance candidates on the far side matter for the tie rule,
        // so prune only on a strictly greater plane distance
        if (heap.size() < k_ || delta * delta <= heap.front().first)
            search(far, q, heap);
    }

    const Matrix& pts_;
    std::size_t dim_;
    std::vector<std::size_t> perm_;
    std::vector<KdNode> nodes_;
    int root_ = -1;
    mutable std::size_t k_ = 0;
    mutable std::size_t exclude_ = static_cast<std::size_t>(-1);
};

}  // namespace

NeighborTable knn(const Matrix& query, const Matrix& data, std::size_t k) {
    if (data.cols() != query.cols() || (data.cols() != 2 && data.cols() != 3))
        throw ArgumentError("knn: dimensions must match and be 2 or 3");
    if (k >= data.rows())
        throw ArgumentError("knn: k = " + std::to_string(k) +
                            " must be smaller than the data size " +
                            std::to_string(data.rows()));
    const bool self = &query == &data;
    KdTree tree(data, data.cols());
    NeighborTable table;
    table.k = k;
    table.neighbors.resize(query.rows());
    std::vector<std::pair<double, std::size_t>> heap;
    heap.reserve(k + 1);
    for (std::size_t i = 0; i < query.rows(); ++i) {
        tree.query(query.row(i), k, self ? i : static_cast<std::size_t>(-1), heap);
        auto& lst = table.neighbors[i];
        lst.resize(heap.size());
        for (std::size_t j = 0; j < heap.size(); ++j) lst[j] = heap[j].second;
    }
    return table;
}

std::vector<std::pair<std::size_t, std::size_t>> unique_edges(
    const std::vector<std::array<std::size_t, 3>>& faces) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(faces.size() * 3);
    for (const auto& f : faces)
        for (std::size_t e = 0; e < 3; ++e) {
            const std::size_t a = f[e], b = f[(e + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::vector<std::size_t>> one_ring(
    std::size_t vertex_count, const std::vector<std::array<std::size_t, 3>>& faces) {
    std::vector<std::vector<std::size_t>> ring(vertex_count);
    for (const auto& [a, b] : unique_edges(faces)) {
        ring[a].push_back(b);
        ring[b].push_back(a);
    }
    for (auto& lst : ring) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
    return ring;
}

double edge_len(const Matrix& pts3, std::size_t a, std::size_t b) {
    const double* pa = pts3.row(a);
    const double* pb = pts3.row(b);
    const double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double edge_len_2d(const Matrix& pts2, std::size_t a, std::size_t b) {
    const double* pa = pts2.row(a);
    const double* pb = pts2.row(b);
    const double dx = pa[0] - pb[0], dy = pa[1] - pb[1];
    return std::sqrt(dx * dx + dy * dy);
}

double face_area_3d(const Matrix& pts3, const std::array<std::size_t, 3>& face) {
    const double* a = pts3.row(face[0]);
    const double* b = pts3.row(face[1]);
    const double* c = pts3.row(face[2]);
    const double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double cx = u[1] * v[2] - u[2] * v[1];
    const double cy = u[2] * v[0] - u[0] * v[2];
    const double cz = u[0] * v[1] - u[1] * v[0];
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

}  // namespace uvmap
