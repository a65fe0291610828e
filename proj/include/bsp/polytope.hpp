#pragma once

#include <array>
#include <optional>

#include "bsp/tensor.hpp"

namespace bsp {

// Clipping tolerance in box units; all geometry runs in 64-bit arithmetic on
// unit-normalized plane rows.
constexpr double kGeoEps = 1e-9;

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;

// n . x + d <= 0 is inside. plane_index >= 0 refers to a learned plane row;
// -1..-6 are bounding-box faces (+x,-x,+y,-y,+z,-z).
struct Halfspace {
    double a = 0, b = 0, c = 0, d = 0;
    int plane_index = 0;

    double eval(const Vec3& p) const { return a * p[0] + b * p[1] + c * p[2] + d; }
    double eval2(const Vec2& p) const { return a * p[0] + b * p[1] + d; }
};

struct ConvexPolytope {
    int source_convex = -1;
    std::vector<Halfspace> halfspaces;
    std::vector<Vec3> vertices;
    std::vector<std::vector<int>> faces; // outward-oriented loops
    std::vector<int> face_plane;         // plane_index per face
};

// 2D analog: CCW vertex loop; edge i runs v[i] -> v[(i+1) % n].
struct ConvexPolygon {
    int source_convex = -1;
    std::vector<Halfspace> halfspaces;
    std::vector<Vec2> vertices;
    std::vector<int> edge_plane;
};

// Per-convex halfspace lists from a plane matrix (p x (d+1)) and a binary
// selection matrix. Rows are normalized to unit normals; rows with near-zero
// normals are skipped (counted in *skipped) unless their offset makes the
// half-space empty, which empties the convex (flagged by a single impossible
// halfspace 0 x + 1 <= 0).
std::vector<std::vector<Halfspace>> shape_halfspaces(const Tensor<double>& planes,
                                                     const Tensor<double>& t_binary, int dim,
                                                     int* skipped = nullptr);

// Incremental half-space clipping of the bounding box [-box_half, box_half]^d.
// Returns nullopt when the intersection is void.
std::optional<ConvexPolytope> extract_polytope(const std::vector<Halfspace>& halfspaces,
                                               double box_half = 0.55, int source_convex = -1);
std::optional<ConvexPolygon> extract_polygon_2d(const std::vector<Halfspace>& halfspaces,
                                                double box_half = 0.55, int source_convex = -1);

struct PolyMesh {
    int dim = 3;
    std::vector<Vec3> vertices;
    std::vector<std::vector<int>> faces; // polygons in 3D, edge pairs in 2D
    std::vector<std::pair<int, int>> face_source; // (convex index, plane index)
};

// Union surface: concatenated boundary faces minus faces whose sample points
// (centroid plus 16 vertex-ward interior points) all fall strictly inside
// some other polytope.
PolyMesh assemble_union(const std::vector<ConvexPolytope>& polytopes);
PolyMesh assemble_union_2d(const std::vector<ConvexPolygon>& polygons);

bool point_in_polytope(const Vec3& p, const ConvexPolytope& poly);
bool point_in_union(const Vec3& p, const std::vector<ConvexPolytope>& polytopes);
bool point_in_polygon(const Vec2& p, const ConvexPolygon& poly);
bool point_in_union_2d(const Vec2& p, const std::vector<ConvexPolygon>& polygons);

// Greedy convex pruning on an occupancy grid of cell centers: drop convex j
// (ascending j) when the union grid without it is unchanged. Returns the keep
// mask over convexes.
std::vector<char> prune_convexes(const std::vector<std::vector<Halfspace>>& convexes, int dim,
                                 int resolution);

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> tris;
    std::vector<std::pair<int, int>> tri_source;
    int dropped_faces = 0;
};

// Fan triangulation of convex polygonal faces; faces of arity < 3 dropped.
TriMesh triangulate(const PolyMesh& mesh);

// Every directed edge of the face loops must appear exactly once in each
// direction.
bool edges_two_manifold(const std::vector<std::vector<int>>& faces);

} // namespace bsp
