#pragma once
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "uvmap/matrix.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// Mesh / point-cloud containers
// ---------------------------------------------------------------------------

struct SurfaceMesh {
    Matrix vertices;                              // V×3
    std::vector<std::array<std::size_t, 3>> faces;  // T×3 vertex indices
    Matrix normals;                               // V×3, unit rows

    [[nodiscard]] std::size_t vertex_count() const { return vertices.rows(); }
    [[nodiscard]] std::size_t face_count() const { return faces.size(); }
};

struct PointSet {
    Matrix points;   // V×3
    Matrix normals;  // V×3 unit rows, or empty when absent

    [[nodiscard]] bool has_normals() const { return normals.rows() == points.rows() && points.rows() > 0; }
    [[nodiscard]] std::size_t size() const { return points.rows(); }
};

struct NeighborTable {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> neighbors;  // per query row, ascending distance
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

// Wavefront OBJ triangle mesh. Quads and larger polygons are fan-triangulated;
// `vt` records are ignored on input. Faces with a repeated vertex index and
// faces that are degenerate after normalization (area < 1e-12) are dropped.
// The mesh comes back normalized, with unit vertex normals (taken from `vn`
// records when they align one-to-one with vertices, otherwise computed).
SurfaceMesh load_mesh(const std::string& path);

// XYZ ("x y z" or "x y z nx ny nz" per line, # comments) or binary
// little-endian PLY with x,y,z[,nx,ny,nz] vertex properties. Normalized.
PointSet load_pointcloud(const std::string& path);

// A previously exported UV OBJ: v/vt/f records, one vt per face corner.
// Taken verbatim — no normalization — so evaluation reproduces export-time
// numbers exactly.
struct UvMeshFile {
    Matrix vertices;                                // V×3
    Matrix uvs;                                     // N_vt×2
    std::vector<std::array<std::size_t, 3>> faces;   // vertex indices
    std::vector<std::array<std::size_t, 3>> face_uvs;  // vt indices, per corner
};
UvMeshFile load_uv_obj(const std::string& path);

// ---------------------------------------------------------------------------
// Geometry operations
// ---------------------------------------------------------------------------

// Area-weighted average of incident face normals; vertices with no incident
// face (or fully cancelling normals) get (0,0,1).
Matrix compute_vertex_normals(const Matrix& vertices,
                              const std::vector<std::array<std::size_t, 3>>& faces);

// Bounding-box center to origin, longest bbox side scaled to 1. All points
// identical raises DegenerateInputError. Idempotent.
SurfaceMesh normalize(SurfaceMesh mesh);
PointSet normalize(PointSet points);
void normalize_points_inplace(Matrix& points);

// Exact k nearest neighbors by Euclidean distance (D = 2 or 3), ties broken
// by lower index. When `query` and `data` are the same object, each point is
// excluded from its own neighbor list.
NeighborTable knn(const Matrix& query, const Matrix& data, std::size_t k);

// Unique undirected mesh edges, each as (lo, hi), lexicographically sorted.
std::vector<std::pair<std::size_t, std::size_t>> unique_edges(
    const std::vector<std::array<std::size_t, 3>>& faces);

// Per-vertex one-ring adjacency (sorted, deduplicated).
std::vector<std::vector<std::size_t>> one_ring(
    std::size_t vertex_count, const std::vector<std::array<std::size_t, 3>>& faces);

// Small metric helpers shared by the loss terms and the evaluator.
double edge_len(const Matrix& pts3, std::size_t a, std::size_t b);
double edge_len_2d(const Matrix& pts2, std::size_t a, std::size_t b);
double face_area_3d(const Matrix& pts3, const std::array<std::size_t, 3>& face);

}  // namespace uvmap
