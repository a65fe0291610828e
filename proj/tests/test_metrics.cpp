#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsp/extract.hpp"
#include "bsp/metrics.hpp"
#include "bsp/rng.hpp"

using namespace bsp;

namespace {

PolyMesh unit_square_two_triangles() {
    PolyMesh mesh;
    mesh.dim = 3;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}, {0, 2, 3}};
    mesh.face_source = {{0, 0}, {0, 1}};
    return mesh;
}

PolyMesh cube_mesh(double h) {
    std::vector<Halfspace> hss = {{1, 0, 0, -h, 0},  {-1, 0, 0, -h, 1}, {0, 1, 0, -h, 2},
                                  {0, -1, 0, -h, 3}, {0, 0, 1, -h, 4},  {0, 0, -1, -h, 5}};
    auto poly = extract_polytope(hss, 0.55, 0);
    return assemble_union({*poly});
}

// geodesic-ish sphere by subdividing an octahedron and normalizing
PolyMesh icosphere(double radius, int subdiv) {
    std::vector<Vec3> verts = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<std::array<int, 3>> tris = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                            {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    for (int s = 0; s < subdiv; ++s) {
        std::vector<std::array<int, 3>> next;
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = {(verts[size_t(a)][0] + verts[size_t(b)][0]) / 2,
                      (verts[size_t(a)][1] + verts[size_t(b)][1]) / 2,
                      (verts[size_t(a)][2] + verts[size_t(b)][2]) / 2};
            double len = std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
            m = {m[0] / len, m[1] / len, m[2] / len};
            int id = int(verts.size());
            verts.push_back(m);
            midpoint.emplace(key, id);
            return id;
        };
        for (const auto& t : tris) {
            int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    PolyMesh mesh;
    mesh.dim = 3;
    for (const auto& v : verts)
        mesh.vertices.push_back({v[0] * radius, v[1] * radius, v[2] * radius});
    for (const auto& t : tris) {
        mesh.faces.push_back({t[0], t[1], t[2]});
        mesh.face_source.emplace_back(0, 0);
    }
    return mesh;
}

} // namespace

TEST_CASE("sample_surface: constant normals on a flat mesh, area weighting, k=0") {
    PolyMesh flat = unit_square_two_triangles();
    SurfaceSampling s = sample_surface(flat, 1000, 1);
    REQUIRE(s.points.size() == 1000);
    for (const auto& n : s.normals) {
        CHECK(n[0] == 0.0);
        CHECK(n[1] == 0.0);
        CHECK(n[2] == doctest::Approx(1.0));
    }

    // two faces of areas 1 and 3: the larger receives 75% +- 5%
    PolyMesh two;
    two.dim = 3;
    two.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                    {2, 0, 0}, {5, 0, 0}, {5, 1, 0}, {2, 1, 0}};
    two.faces = {{0, 1, 2, 3}, {4, 5, 6, 7}};
    two.face_source = {{0, 0}, {0, 1}};
    SurfaceSampling ws = sample_surface(two, 20000, 7);
    int big = 0;
    for (const auto& p : ws.points) big += p[0] >= 2.0 ? 1 : 0;
    CHECK(double(big) / 20000.0 == doctest::Approx(0.75).epsilon(0.0667));

    CHECK(sample_surface(flat, 0, 1).points.empty());
    PolyMesh empty;
    empty.dim = 3;
    CHECK_THROWS_AS(sample_surface(empty, 10, 1), std::invalid_argument);
}

TEST_CASE("chamfer distance: identity, hand value, symmetry, scaling") {
    std::vector<Vec3> a = {{0, 0, 0}, {1, 2, 3}};
    CHECK(chamfer_distance(a, a) == 0.0);

    std::vector<Vec3> single_a = {{0, 0, 0}};
    std::vector<Vec3> single_b = {{1, 0, 0}};
    CHECK(chamfer_distance(single_a, single_b) == doctest::Approx(2000.0));
    CHECK(chamfer_distance(single_b, single_a) == doctest::Approx(2000.0));

    Rng rng(3);
    std::vector<Vec3> pa, pb;
    for (int i = 0; i < 40; ++i) {
        pa.push_back({rng.normal(), rng.normal(), rng.normal()});
        pb.push_back({rng.normal(), rng.normal(), rng.normal()});
    }
    double cd = chamfer_distance(pa, pb);
    CHECK(chamfer_distance(pb, pa) == doctest::Approx(cd));
    auto scale = [](std::vector<Vec3> v, double s) {
        for (auto& p : v)
            for (int k = 0; k < 3; ++k) p[size_t(k)] *= s;
        return v;
    };
    CHECK(chamfer_distance(scale(pa, 2.0), scale(pb, 2.0)) == doctest::Approx(4.0 * cd));

    CHECK_THROWS_AS(chamfer_distance({}, pa), std::invalid_argument);
}

TEST_CASE("normal consistency: identical 1, orthogonal 0, bounded") {
    SurfaceSampling s;
    s.points = {{0, 0, 0}, {1, 0, 0}};
    s.normals = {{0, 0, 1}, {0, 0, 1}};
    CHECK(normal_consistency(s, s) == doctest::Approx(1.0));

    SurfaceSampling t = s;
    t.normals = {{1, 0, 0}, {0, 1, 0}};
    CHECK(normal_consistency(s, t) == doctest::Approx(0.0));

    Rng rng(4);
    SurfaceSampling u, v;
    for (int i = 0; i < 30; ++i) {
        auto rand_unit = [&]() {
            Vec3 n = {rng.normal(), rng.normal(), rng.normal()};
            double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            return Vec3{n[0] / len, n[1] / len, n[2] / len};
        };
        u.points.push_back({rng.unit(), rng.unit(), rng.unit()});
        v.points.push_back({rng.unit(), rng.unit(), rng.unit()});
        u.normals.push_back(rand_unit());
        v.normals.push_back(rand_unit());
    }
    double nc = normal_consistency(u, v);
    CHECK(nc >= 0.0);
    CHECK(nc <= 1.0);
}

TEST_CASE("edge sampling separates the cube from the sphere") {
    PolyMesh cube = cube_mesh(0.25);
    SurfaceSampling cs = sample_surface(cube, 16000, 11);
    SurfaceSampling ce = edge_sampling(cs, 0.01, 0.1);
    double cube_fraction = double(ce.points.size()) / 16000.0;
    CHECK(cube_fraction >= 0.03);

    // retained points hug the cube edges: distance to the nearest edge < 0.02
    auto edge_distance = [](const Vec3& p) {
        double h = 0.25;
        auto clamp = [&](double v) { return std::max(-h, std::min(h, v)); };
        double best = 1e9;
        for (int axis = 0; axis < 3; ++axis)
            for (int sa : {-1, 1})
                for (int sb : {-1, 1}) {
                    // edge parallel to `axis` at the corner (sa h, sb h) of the other two
                    double da = p[size_t((axis + 1) % 3)] - sa * h;
                    double db = p[size_t((axis + 2) % 3)] - sb * h;
                    double dc = p[size_t(axis)] - clamp(p[size_t(axis)]);
                    best = std::min(best, std::sqrt(da * da + db * db + dc * dc));
                }
        return best;
    };
    int near = 0;
    for (const auto& p : ce.points) near += edge_distance(p) < 0.02 ? 1 : 0;
    CHECK(double(near) >= 0.95 * double(ce.points.size()));

    PolyMesh sphere = icosphere(0.25, 4);
    SurfaceSampling ss = sample_surface(sphere, 16000, 12);
    SurfaceSampling se = edge_sampling(ss, 0.01, 0.1);
    CHECK(double(se.points.size()) / 16000.0 < 0.01);
}

TEST_CASE("an isolated point has sigma 1 and never counts as an edge") {
    SurfaceSampling s;
    s.points = {{0, 0, 0}, {5, 5, 5}};
    s.normals = {{0, 0, 1}, {1, 0, 0}};
    SurfaceSampling e = edge_sampling(s, 0.01, 0.1);
    CHECK(e.points.empty());
}

TEST_CASE("edge chamfer distance: cube self-distance zero, cube vs sphere positive") {
    PolyMesh cube = cube_mesh(0.25);
    SurfaceSampling a = sample_surface(cube, 16000, 21);
    SurfaceSampling b = sample_surface(cube, 16000, 21); // shared seed
    CHECK(edge_chamfer_distance(a, b) == 0.0);

    PolyMesh sphere = icosphere(0.25, 4);
    double ecd = edge_chamfer_distance(cube, sphere, 16000, 21, 22);
    CHECK(ecd > 0.0);

    // both smooth: centroid fallback keeps the metric finite and near zero
    double ss = edge_chamfer_distance(sphere, sphere, 16000, 5, 6);
    CHECK(std::isfinite(ss));
    CHECK(ss < 1.0);
}

TEST_CASE("vote_labels: majority, tie to lowest index, no-voter convexes unassigned") {
    // single convex, unanimous
    CHECK(vote_labels({0, 0, 0}, {2, 2, 2}, 1, 3) == std::vector<int>{2});

    // votes {label0: 3, label1: 5} -> label 1
    std::vector<int> pc = {0, 0, 0, 0, 0, 0, 0, 0};
    std::vector<int> pl = {0, 0, 0, 1, 1, 1, 1, 1};
    CHECK(vote_labels(pc, pl, 1, 2) == std::vector<int>{1});

    // tie 4:4 -> lowest label index
    std::vector<int> tie_labels = {0, 0, 0, 0, 1, 1, 1, 1};
    CHECK(vote_labels(pc, tie_labels, 1, 2) == std::vector<int>{0});

    // convex 1 receives no votes
    CHECK(vote_labels({0, 0}, {1, 1}, 2, 2) == std::vector<int>{1, -1});

    // permutation invariance
    Rng rng(9);
    std::vector<int> conv, lab;
    for (int i = 0; i < 50; ++i) {
        conv.push_back(rng.uniform_int(0, 3));
        lab.push_back(rng.uniform_int(0, 2));
    }
    auto base = vote_labels(conv, lab, 4, 3);
    std::vector<size_t> perm(conv.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[size_t(rng.next_u64() % uint64_t(i))]);
    std::vector<int> conv2, lab2;
    for (size_t i : perm) {
        conv2.push_back(conv[i]);
        lab2.push_back(lab[i]);
    }
    CHECK(vote_labels(conv2, lab2, 4, 3) == base);
}

TEST_CASE("per-label IoU: perfect, disjoint, half") {
    std::vector<int> gt = {0, 0, 1, 1, 2, 2};
    CHECK(per_label_iou(gt, gt, 3) == doctest::Approx(1.0));

    std::vector<int> shifted = {1, 1, 2, 2, 0, 0};
    CHECK(per_label_iou(shifted, gt, 3) == doctest::Approx(0.0));

    // half of label 0 correct, nothing spurious: IoU(0) = 0.5
    std::vector<int> gt2 = {0, 0, 1, 1};
    std::vector<int> pred2 = {0, 1, 1, 1};
    // label 0: inter 1, union 2 -> 0.5; label 1: inter 2, union 3
    CHECK(per_label_iou(pred2, gt2, 2) == doctest::Approx(0.5 * (0.5 + 2.0 / 3.0)));

    // a label absent from both sides is excluded from the mean
    CHECK(per_label_iou(gt2, gt2, 5) == doctest::Approx(1.0));
}

TEST_CASE("argmin_rows breaks ties toward the lowest column") {
    Tensor<float> v({2, 3});
    v.at(0, 0) = 0.5f;
    v.at(0, 1) = 0.2f;
    v.at(0, 2) = 0.2f;
    v.at(1, 0) = 0.0f;
    v.at(1, 1) = 0.0f;
    v.at(1, 2) = 0.0f;
    CHECK(argmin_rows(v) == std::vector<int>{1, 0});
}
