#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsp/extract.hpp"
#include "bsp/polytope.hpp"
#include "bsp/rng.hpp"

using namespace bsp;

namespace {

std::vector<Halfspace> cube_halfspaces(double h) {
    return {{1, 0, 0, -h, 0},  {-1, 0, 0, -h, 1}, {0, 1, 0, -h, 2},
            {0, -1, 0, -h, 3}, {0, 0, 1, -h, 4},  {0, 0, -1, -h, 5}};
}

std::vector<Halfspace> square_halfspaces(double h) {
    return {{1, 0, 0, -h, 0}, {-1, 0, 0, -h, 1}, {0, 1, 0, -h, 2}, {0, -1, 0, -h, 3}};
}

} // namespace

TEST_CASE("cube from six half-spaces: 8 vertices, 6 quads, watertight") {
    auto poly = extract_polytope(cube_halfspaces(0.25));
    REQUIRE(poly.has_value());
    CHECK(poly->vertices.size() == 8);
    CHECK(poly->faces.size() == 6);
    for (const auto& f : poly->faces) CHECK(f.size() == 4);
    CHECK(edges_two_manifold(poly->faces));
    // every face belongs to a learned plane, the box is fully clipped away
    for (int fp : poly->face_plane) CHECK(fp >= 0);
    // vertex satisfaction invariant
    for (const auto& v : poly->vertices)
        for (const auto& hs : poly->halfspaces) CHECK(hs.eval(v) <= 1e-8);
}

TEST_CASE("single half-space keeps half of the bounding box") {
    auto poly = extract_polytope({{1, 0, 0, 0, 7}}, 0.55);
    REQUIRE(poly.has_value());
    CHECK(poly->vertices.size() == 8);
    CHECK(poly->faces.size() == 6);
    CHECK(edges_two_manifold(poly->faces));
    for (const auto& v : poly->vertices) CHECK(v[0] <= 1e-9);
    int cut_faces = 0;
    for (int fp : poly->face_plane) cut_faces += fp == 7 ? 1 : 0;
    CHECK(cut_faces == 1);
}

TEST_CASE("contradictory half-spaces produce the empty polytope") {
    std::vector<Halfspace> contradiction = {{1, 0, 0, 1, 0}, {-1, 0, 0, 1, 1}}; // x <= -1, x >= 1
    CHECK(!extract_polytope(contradiction).has_value());
    CHECK(!extract_polygon_2d(contradiction).has_value());
}

TEST_CASE("degenerate plane rows are skipped or empty the convex") {
    Tensor<double> planes({2, 4});
    planes.at(0, 0) = 1;
    planes.at(0, 3) = -0.25; // x <= 0.25
    planes.at(1, 3) = -0.5;  // 0 x <= 0.5: vacuous, skipped
    Tensor<double> t({2, 1});
    t.at(0, 0) = 1;
    t.at(1, 0) = 1;
    int skipped = 0;
    auto lists = shape_halfspaces(planes, t, 3, &skipped);
    CHECK(skipped == 1);
    CHECK(lists[0].size() == 1);

    planes.at(1, 3) = 0.5; // 0 x + 0.5 <= 0: unsatisfiable
    auto lists2 = shape_halfspaces(planes, t, 3, &skipped);
    REQUIRE(lists2[0].size() == 1);
    CHECK(!extract_polytope(lists2[0]).has_value());
}

TEST_CASE("normalization keeps half-space membership") {
    Tensor<double> planes({1, 4});
    planes.at(0, 0) = 10.0;
    planes.at(0, 3) = -2.5; // 10x - 2.5 <= 0 i.e. x <= 0.25
    Tensor<double> t({1, 1});
    t.at(0, 0) = 1;
    auto lists = shape_halfspaces(planes, t, 3);
    CHECK(lists[0][0].a == doctest::Approx(1.0));
    CHECK(lists[0][0].d == doctest::Approx(-0.25));
}

TEST_CASE("2D square, triangle, and redundant half-plane") {
    auto square = extract_polygon_2d(square_halfspaces(0.25));
    REQUIRE(square.has_value());
    CHECK(square->vertices.size() == 4);

    std::vector<Halfspace> tri = {{0, -1, 0, 0, 0},   // y >= 0
                                  {1, 1, 0, -0.4, 1}, // x + y <= 0.4
                                  {-1, 1, 0, -0.4, 2}};
    auto triangle = extract_polygon_2d(tri);
    REQUIRE(triangle.has_value());
    CHECK(triangle->vertices.size() == 3);

    // a 5th half-plane containing the square adds no vertices and no edge
    auto redundant = square_halfspaces(0.25);
    redundant.push_back({1, 1, 0, -0.9, 9});
    auto same = extract_polygon_2d(redundant);
    REQUIRE(same.has_value());
    CHECK(same->vertices.size() == 4);
    for (int ep : same->edge_plane) CHECK(ep != 9);
}

TEST_CASE("assemble_union keeps a lone polytope unchanged") {
    auto poly = extract_polytope(cube_halfspaces(0.25));
    PolyMesh mesh = assemble_union({*poly});
    CHECK(mesh.faces.size() == 6);
    CHECK(edges_two_manifold(mesh.faces));
}

TEST_CASE("assemble_union of two disjoint cubes keeps all 12 faces") {
    // x in [-0.4, -0.1] and x in [0.1, 0.4]
    std::vector<Halfspace> a = {{1, 0, 0, 0.1, 0},   {-1, 0, 0, -0.4, 1}, {0, 1, 0, -0.1, 2},
                                {0, -1, 0, -0.1, 3}, {0, 0, 1, -0.1, 4},  {0, 0, -1, -0.1, 5}};
    std::vector<Halfspace> b = {{1, 0, 0, -0.4, 0},  {-1, 0, 0, 0.1, 1},  {0, 1, 0, -0.1, 2},
                                {0, -1, 0, -0.1, 3}, {0, 0, 1, -0.1, 4},  {0, 0, -1, -0.1, 5}};
    auto pa = extract_polytope(a, 0.55, 0);
    auto pb = extract_polytope(b, 0.55, 1);
    REQUIRE(pa.has_value());
    REQUIRE(pb.has_value());
    PolyMesh mesh = assemble_union({*pa, *pb});
    CHECK(mesh.faces.size() == 12);
}

TEST_CASE("assemble_union drops the boundary of a contained cube") {
    auto outer = extract_polytope(cube_halfspaces(0.4), 0.55, 0);
    auto inner = extract_polytope(cube_halfspaces(0.1), 0.55, 1);
    REQUIRE(outer.has_value());
    REQUIRE(inner.has_value());
    PolyMesh mesh = assemble_union({*outer, *inner});
    CHECK(mesh.faces.size() == 6);
    for (const auto& src : mesh.face_source) CHECK(src.first == 0);

    // membership is half-space defined: hidden-face culling cannot change it
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        Vec3 p = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        bool in_union = point_in_union(p, {*outer, *inner});
        bool in_outer = point_in_polytope(p, *outer);
        CHECK(in_union == in_outer);
    }
}

TEST_CASE("point_in_union boundary convention is inclusive") {
    auto cube = extract_polytope(cube_halfspaces(0.25));
    REQUIRE(cube.has_value());
    CHECK(point_in_union({0, 0, 0}, {*cube}));
    CHECK(!point_in_union({0.3, 0, 0}, {*cube}));
    CHECK(point_in_union({0.25, 0, 0}, {*cube})); // on a face
}

TEST_CASE("prune_convexes drops contained and duplicate convexes only") {
    auto big = cube_halfspaces(0.4);
    auto small = cube_halfspaces(0.1);
    std::vector<char> keep = prune_convexes({big, small}, 3, 32);
    CHECK(keep == std::vector<char>{1, 0});

    // identical convexes: greedy ascending order prunes exactly the first
    std::vector<char> dup = prune_convexes({big, big}, 3, 32);
    CHECK(dup == std::vector<char>{0, 1});

    // disjoint convexes survive
    std::vector<Halfspace> left = {{1, 0, 0, 0.05, 0}, {-1, 0, 0, -0.4, 1}, {0, 1, 0, -0.3, 2},
                                   {0, -1, 0, -0.3, 3}, {0, 0, 1, -0.3, 4}, {0, 0, -1, -0.3, 5}};
    std::vector<Halfspace> right = {{1, 0, 0, -0.4, 0}, {-1, 0, 0, 0.05, 1}, {0, 1, 0, -0.3, 2},
                                    {0, -1, 0, -0.3, 3}, {0, 0, 1, -0.3, 4}, {0, 0, -1, -0.3, 5}};
    CHECK(prune_convexes({left, right}, 3, 32) == std::vector<char>{1, 1});
}

TEST_CASE("pruning preserves the union occupancy grid exactly") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        // random boxes as convexes
        std::vector<std::vector<Halfspace>> convexes;
        int n = rng.uniform_int(2, 6);
        for (int j = 0; j < n; ++j) {
            double x0 = rng.uniform(-0.4, 0.1), y0 = rng.uniform(-0.4, 0.1), z0 = rng.uniform(-0.4, 0.1);
            double x1 = x0 + rng.uniform(0.1, 0.4), y1 = y0 + rng.uniform(0.1, 0.4),
                   z1 = z0 + rng.uniform(0.1, 0.4);
            convexes.push_back({{1, 0, 0, -x1, 0},
                                {-1, 0, 0, x0, 1},
                                {0, 1, 0, -y1, 2},
                                {0, -1, 0, y0, 3},
                                {0, 0, 1, -z1, 4},
                                {0, 0, -1, z0, 5}});
        }
        const int res = 16;
        std::vector<char> keep = prune_convexes(convexes, 3, res);
        auto union_grid = [&](const std::vector<char>& mask) {
            std::vector<char> grid(size_t(res) * res * res, 0);
            size_t cell = 0;
            for (int z = 0; z < res; ++z)
                for (int y = 0; y < res; ++y)
                    for (int x = 0; x < res; ++x, ++cell) {
                        Vec3 p = {(x + 0.5) / res - 0.5, (y + 0.5) / res - 0.5,
                                  (z + 0.5) / res - 0.5};
                        for (size_t j = 0; j < convexes.size(); ++j) {
                            if (!mask[j]) continue;
                            bool inside = true;
                            for (const auto& hs : convexes[j])
                                if (hs.eval(p) > 0.0) {
                                    inside = false;
                                    break;
                                }
                            if (inside) {
                                grid[cell] = 1;
                                break;
                            }
                        }
                    }
            return grid;
        };
        std::vector<char> all(convexes.size(), 1);
        CHECK(union_grid(all) == union_grid(keep));
        size_t kept = 0;
        for (char k : keep) kept += size_t(k);
        CHECK(kept <= convexes.size());
    }
}

TEST_CASE("triangulate fans convex faces") {
    auto cube = extract_polytope(cube_halfspaces(0.25));
    PolyMesh mesh = assemble_union({*cube});
    TriMesh tri = triangulate(mesh);
    CHECK(tri.tris.size() == 12);
    CHECK(tri.vertices.size() == 8);
    CHECK(tri.dropped_faces == 0);

    PolyMesh hex;
    hex.dim = 3;
    for (int i = 0; i < 6; ++i) {
        double a = 2.0 * 3.14159265358979 * i / 6.0;
        hex.vertices.push_back({std::cos(a), std::sin(a), 0.0});
    }
    hex.faces.push_back({0, 1, 2, 3, 4, 5});
    hex.face_source.emplace_back(0, 0);
    CHECK(triangulate(hex).tris.size() == 4);

    PolyMesh bad = hex;
    bad.faces.push_back({0, 1});
    bad.face_source.emplace_back(0, 1);
    TriMesh dropped = triangulate(bad);
    CHECK(dropped.dropped_faces == 1);
    CHECK(dropped.tris.size() == 4);
}

TEST_CASE("clipped polytopes keep outward orientation") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Halfspace> hss;
        int n = rng.uniform_int(1, 8);
        for (int i = 0; i < n; ++i) {
            Vec3 nrm = {rng.normal(), rng.normal(), rng.normal()};
            double len = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
            if (len < 1e-6) continue;
            hss.push_back({nrm[0] / len, nrm[1] / len, nrm[2] / len, rng.uniform(-0.4, 0.1),
                           int(hss.size())});
        }
        auto poly = extract_polytope(hss);
        if (!poly) continue;
        CHECK(edges_two_manifold(poly->faces));
        // face normals point away from the interior centroid
        Vec3 c = {0, 0, 0};
        for (const auto& v : poly->vertices)
            for (int k = 0; k < 3; ++k) c[size_t(k)] += v[size_t(k)] / double(poly->vertices.size());
        for (size_t f = 0; f < poly->faces.size(); ++f) {
            const auto& loop = poly->faces[f];
            Vec3 nrm = {0, 0, 0}; // Newell
            for (size_t i = 0; i < loop.size(); ++i) {
                const Vec3& a = poly->vertices[size_t(loop[i])];
                const Vec3& b = poly->vertices[size_t(loop[(i + 1) % loop.size()])];
                nrm[0] += (a[1] - b[1]) * (a[2] + b[2]);
                nrm[1] += (a[2] - b[2]) * (a[0] + b[0]);
                nrm[2] += (a[0] - b[0]) * (a[1] + b[1]);
            }
            Vec3 mid = {0, 0, 0};
            for (int id : loop)
                for (int k = 0; k < 3; ++k)
                    mid[size_t(k)] += poly->vertices[size_t(id)][size_t(k)] / double(loop.size());
            double dot = 0;
            for (int k = 0; k < 3; ++k) dot += nrm[size_t(k)] * (mid[size_t(k)] - c[size_t(k)]);
            CHECK(dot > 0.0);
        }
    }
}

TEST_CASE("2D union assembly culls edges hidden inside other polygons") {
    auto outer = extract_polygon_2d(square_halfspaces(0.4), 0.55, 0);
    auto inner = extract_polygon_2d(square_halfspaces(0.1), 0.55, 1);
    REQUIRE(outer.has_value());
    REQUIRE(inner.has_value());
    PolyMesh mesh = assemble_union_2d({*outer, *inner});
    CHECK(mesh.faces.size() == 4);
    for (const auto& src : mesh.face_source) CHECK(src.first == 0);
}
