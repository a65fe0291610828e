#include "bsp/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bsp {

namespace {

constexpr double kOnEps = kGeoEps;
constexpr double kAssertEps = 1e-8; // kOnEps plus merge slack

double dist2(const Vec3& a, const Vec3& b) {
    double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

ConvexPolytope box_polytope(double h) {
    ConvexPolytope p;
    p.vertices = {{-h, -h, -h}, {h, -h, -h}, {-h, h, -h}, {h, h, -h},
                  {-h, -h, h},  {h, -h, h},  {-h, h, h},  {h, h, h}};
    p.faces = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
    p.face_plane = {-6, -5, -4, -3, -2, -1};
    p.halfspaces = {{1, 0, 0, -h, -1},  {-1, 0, 0, -h, -2}, {0, 1, 0, -h, -3},
                    {0, -1, 0, -h, -4}, {0, 0, 1, -h, -5},  {0, 0, -1, -h, -6}};
    return p;
}

// Clip a polytope in place; returns false when the result is void.
bool clip(ConvexPolytope& poly, const Halfspace& hs) {
    const size_t nv = poly.vertices.size();
    std::vector<double> s(nv);
    bool any_out = false, any_in = false;
    for (size_t i = 0; i < nv; ++i) {
        s[i] = hs.eval(poly.vertices[i]);
        if (s[i] > kOnEps) any_out = true;
        if (s[i] < -kOnEps) any_in = true;
    }
    if (!any_out) return true; // redundant plane, no face contributed
    if (!any_in) return false; // entirely outside (or a sliver)

    // intersection vertex per crossing edge, shared between adjacent faces
    std::map<std::pair<int, int>, int> cut_vertex;
    auto intersect = [&](int u, int v) {
        auto key = std::minmax(u, v);
        auto it = cut_vertex.find(key);
        if (it != cut_vertex.end()) return it->second;
        double t = s[size_t(u)] / (s[size_t(u)] - s[size_t(v)]);
        const Vec3& pu = poly.vertices[size_t(u)];
        const Vec3& pv = poly.vertices[size_t(v)];
        Vec3 x = {pu[0] + t * (pv[0] - pu[0]), pu[1] + t * (pv[1] - pu[1]),
                  pu[2] + t * (pv[2] - pu[2])};
        int id;
        if (dist2(x, pu) < kOnEps * kOnEps)
            id = u;
        else if (dist2(x, pv) < kOnEps * kOnEps)
            id = v;
        else {
            id = int(poly.vertices.size());
            poly.vertices.push_back(x);
        }
        cut_vertex.emplace(key, id);
        return id;
    };

    std::vector<std::vector<int>> new_faces;
    std::vector<int> new_face_plane;
    for (size_t f = 0; f < poly.faces.size(); ++f) {
        const auto& loop = poly.faces[f];
        std::vector<int> out;
        for (size_t i = 0; i < loop.size(); ++i) {
            int u = loop[i];
            int v = loop[(i + 1) % loop.size()];
            bool u_in = s[size_t(u)] <= kOnEps;
            if (u_in) out.push_back(u);
            // a crossing point is needed only when the edge straddles the
            // plane strictly; an on-plane endpoint is itself the crossing
            bool u_strict = s[size_t(u)] < -kOnEps;
            bool v_strict = s[size_t(v)] < -kOnEps;
            bool u_out = s[size_t(u)] > kOnEps;
            bool v_out = s[size_t(v)] > kOnEps;
            if ((u_strict && v_out) || (u_out && v_strict)) out.push_back(intersect(u, v));
        }
        // drop consecutive duplicates
        std::vector<int> dedup;
        for (int id : out)
            if (dedup.empty() || dedup.back() != id) dedup.push_back(id);
        while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
        if (dedup.size() >= 3) {
            new_faces.push_back(std::move(dedup));
            new_face_plane.push_back(poly.face_plane[f]);
        }
    }

    // cap: all surviving vertices on the cutting plane, ordered around the
    // plane normal (convex section, so an angular sort is exact enough)
    std::vector<int> used_mark(poly.vertices.size(), 0);
    for (const auto& fc : new_faces)
        for (int id : fc) used_mark[size_t(id)] = 1;
    std::vector<int> cap;
    for (size_t i = 0; i < poly.vertices.size(); ++i) {
        double e = i < nv ? s[i] : 0.0; // new vertices sit on the plane
        if (used_mark[i] && std::abs(e) <= kOnEps) cap.push_back(int(i));
    }
    if (cap.size() >= 3) {
        Vec3 centroid = {0, 0, 0};
        for (int id : cap)
            for (int k = 0; k < 3; ++k) centroid[size_t(k)] += poly.vertices[size_t(id)][size_t(k)];
        for (int k = 0; k < 3; ++k) centroid[size_t(k)] /= double(cap.size());
        Vec3 n = {hs.a, hs.b, hs.c};
        Vec3 ref = std::abs(n[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 u = {n[1] * ref[2] - n[2] * ref[1], n[2] * ref[0] - n[0] * ref[2],
                  n[0] * ref[1] - n[1] * ref[0]};
        double ul = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        for (int k = 0; k < 3; ++k) u[size_t(k)] /= ul;
        Vec3 w = {n[1] * u[2] - n[2] * u[1], n[2] * u[0] - n[0] * u[2], n[0] * u[1] - n[1] * u[0]};
        std::vector<std::pair<double, int>> angled;
        for (int id : cap) {
            const Vec3& p = poly.vertices[size_t(id)];
            Vec3 r = {p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
            double au = r[0] * u[0] + r[1] * u[1] + r[2] * u[2];
            double aw = r[0] * w[0] + r[1] * w[1] + r[2] * w[2];
            angled.emplace_back(std::atan2(aw, au), id);
        }
        std::sort(angled.begin(), angled.end());
        std::vector<int> loop;
        for (auto& [ang, id] : angled) loop.push_back(id);
        new_faces.push_back(std::move(loop));
        new_face_plane.push_back(hs.plane_index);
    }

    if (new_faces.empty()) return false;
    poly.faces = std::move(new_faces);
    poly.face_plane = std::move(new_face_plane);

    // compact the vertex pool
    std::vector<int> remap(poly.vertices.size(), -1);
    std::vector<Vec3> verts;
    for (auto& fc : poly.faces)
        for (int& id : fc) {
            if (remap[size_t(id)] < 0) {
                remap[size_t(id)] = int(verts.size());
                verts.push_back(poly.vertices[size_t(id)]);
            }
            id = remap[size_t(id)];
        }
    poly.vertices = std::move(verts);
    return poly.vertices.size() >= 4;
}

} // namespace

std::vector<std::vector<Halfspace>> shape_halfspaces(const Tensor<double>& planes,
                                                     const Tensor<double>& t_binary, int dim,
                                                     int* skipped) {
    if (skipped) *skipped = 0;
    int p = planes.dim(0), c = t_binary.dim(1);
    std::vector<std::vector<Halfspace>> out(size_t(c), std::vector<Halfspace>{});
    for (int j = 0; j < c; ++j) {
        for (int k = 0; k < p; ++k) {
            if (t_binary.at(k, j) <= 0.5) continue;
            Halfspace hs;
            hs.a = planes.at(k, 0);
            hs.b = planes.at(k, 1);
            hs.c = dim == 3 ? planes.at(k, 2) : 0.0;
            hs.d = planes.at(k, dim);
            hs.plane_index = k;
            double norm = std::sqrt(hs.a * hs.a + hs.b * hs.b + hs.c * hs.c);
            if (norm < 1e-12) {
                if (hs.d > kGeoEps) {
                    // unsatisfiable constraint: the convex is empty
                    out[size_t(j)] = {Halfspace{0, 0, 0, 1, k}};
                    break;
                }
                if (skipped) ++*skipped;
                continue;
            }
            hs.a /= norm;
            hs.b /= norm;
            hs.c /= norm;
            hs.d /= norm;
            out[size_t(j)].push_back(hs);
        }
    }
    return out;
}

std::optional<ConvexPolytope> extract_polytope(const std::vector<Halfspace>& halfspaces,
                                               double box_half, int source_convex) {
    ConvexPolytope poly = box_polytope(box_half);
    poly.source_convex = source_convex;
    for (const Halfspace& hs : halfspaces) {
        double norm = std::sqrt(hs.a * hs.a + hs.b * hs.b + hs.c * hs.c);
        if (norm < 1e-12) {
            if (hs.d > kGeoEps) return std::nullopt;
            continue;
        }
        if (!clip(poly, hs)) return std::nullopt;
        poly.halfspaces.push_back(hs);
    }
    for (const Vec3& v : poly.vertices)
        for (const Halfspace& hs : poly.halfspaces)
            if (hs.eval(v) > kAssertEps)
                throw std::logic_error("extract_polytope: vertex violates a defining half-space");
    return poly;
}

std::optional<ConvexPolygon> extract_polygon_2d(const std::vector<Halfspace>& halfspaces,
                                                double box_half, int source_convex) {
    ConvexPolygon poly;
    poly.source_convex = source_convex;
    const double h = box_half;
    poly.vertices = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
    poly.edge_plane = {-4, -1, -3, -2};
    poly.halfspaces = {{1, 0, 0, -h, -1}, {-1, 0, 0, -h, -2}, {0, 1, 0, -h, -3}, {0, -1, 0, -h, -4}};

    for (const Halfspace& in_hs : halfspaces) {
        Halfspace hs = in_hs;
        double norm = std::sqrt(hs.a * hs.a + hs.b * hs.b);
        if (norm < 1e-12) {
            if (hs.d > kGeoEps) return std::nullopt;
            continue;
        }
        const size_t nv = poly.vertices.size();
        std::vector<double> s(nv);
        bool any_out = false, any_in = false;
        for (size_t i = 0; i < nv; ++i) {
            s[i] = hs.eval2(poly.vertices[i]);
            if (s[i] > kOnEps) any_out = true;
            if (s[i] < -kOnEps) any_in = true;
        }
        if (!any_out) {
            poly.halfspaces.push_back(hs);
            continue;
        }
        if (!any_in) return std::nullopt;

        std::vector<Vec2> nverts;
        std::vector<int> nplanes;
        for (size_t i = 0; i < nv; ++i) {
            size_t j = (i + 1) % nv;
            bool i_in = s[i] <= kOnEps;
            if (i_in) {
                nverts.push_back(poly.vertices[i]);
                nplanes.push_back(poly.edge_plane[i]);
            }
            bool i_strict = s[i] < -kOnEps;
            bool j_strict = s[j] < -kOnEps;
            bool i_out = s[i] > kOnEps;
            bool j_out = s[j] > kOnEps;
            if ((i_strict && j_out) || (i_out && j_strict)) {
                double t = s[i] / (s[i] - s[j]);
                const Vec2& a = poly.vertices[i];
                const Vec2& b = poly.vertices[j];
                Vec2 x = {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
                nverts.push_back(x);
                // leaving the cut point along the cut when exiting, along the
                // original edge when re-entering
                nplanes.push_back(i_strict ? hs.plane_index : poly.edge_plane[i]);
            }
        }
        // drop zero-length edges
        std::vector<Vec2> cverts;
        std::vector<int> cplanes;
        for (size_t i = 0; i < nverts.size(); ++i) {
            size_t j = (i + 1) % nverts.size();
            double dx = nverts[i][0] - nverts[j][0], dy = nverts[i][1] - nverts[j][1];
            if (dx * dx + dy * dy <= kOnEps * kOnEps) continue;
            cverts.push_back(nverts[i]);
            cplanes.push_back(nplanes[i]);
        }
        if (cverts.size() < 3) return std::nullopt;
        poly.vertices = std::move(cverts);
        poly.edge_plane = std::move(cplanes);
        poly.halfspaces.push_back(hs);
    }
    for (const Vec2& v : poly.vertices)
        for (const Halfspace& hs : poly.halfspaces)
            if (hs.eval2(v) > kAssertEps)
                throw std::logic_error("extract_polygon_2d: vertex violates a defining half-space");
    return poly;
}

bool point_in_polytope(const Vec3& p, const ConvexPolytope& poly) {
    for (const Halfspace& hs : poly.halfspaces)
        if (hs.eval(p) > 0.0) return false;
    return true;
}

bool point_in_union(const Vec3& p, const std::vector<ConvexPolytope>& polytopes) {
    for (const auto& poly : polytopes)
        if (point_in_polytope(p, poly)) return true;
    return false;
}

bool point_in_polygon(const Vec2& p, const ConvexPolygon& poly) {
    for (const Halfspace& hs : poly.halfspaces)
        if (hs.eval2(p) > 0.0) return false;
    return true;
}

bool point_in_union_2d(const Vec2& p, const std::vector<ConvexPolygon>& polygons) {
    for (const auto& poly : polygons)
        if (point_in_polygon(p, poly)) return true;
    return false;
}

namespace {

bool strictly_inside(const Vec3& p, const ConvexPolytope& poly) {
    for (const Halfspace& hs : poly.halfspaces)
        if (hs.eval(p) >= -kGeoEps) return false;
    return true;
}

bool strictly_inside_2d(const Vec2& p, const ConvexPolygon& poly) {
    for (const Halfspace& hs : poly.halfspaces)
        if (hs.eval2(p) >= -kGeoEps) return false;
    return true;
}

} // namespace

PolyMesh assemble_union(const std::vector<ConvexPolytope>& polytopes) {
    PolyMesh mesh;
    mesh.dim = 3;
    std::vector<int> offset;
    for (const auto& poly : polytopes) {
        offset.push_back(int(mesh.vertices.size()));
        mesh.vertices.insert(mesh.vertices.end(), poly.vertices.begin(), poly.vertices.end());
    }
    for (size_t pi = 0; pi < polytopes.size(); ++pi) {
        const auto& poly = polytopes[pi];
        for (size_t f = 0; f < poly.faces.size(); ++f) {
            const auto& loop = poly.faces[f];
            Vec3 centroid = {0, 0, 0};
            for (int id : loop)
                for (int k = 0; k < 3; ++k) centroid[size_t(k)] += poly.vertices[size_t(id)][size_t(k)];
            for (int k = 0; k < 3; ++k) centroid[size_t(k)] /= double(loop.size());

            std::vector<Vec3> samples = {centroid};
            int rings = int((16 + loop.size() - 1) / loop.size());
            for (int k = 0; k < 16; ++k) {
                const Vec3& v = poly.vertices[size_t(loop[size_t(k) % loop.size()])];
                double fr = 0.95 * double(k / int(loop.size()) + 1) / double(rings + 1);
                samples.push_back({centroid[0] + fr * (v[0] - centroid[0]),
                                   centroid[1] + fr * (v[1] - centroid[1]),
                                   centroid[2] + fr * (v[2] - centroid[2])});
            }
            bool hidden = true;
            for (const Vec3& smp : samples) {
                bool inside_other = false;
                for (size_t pj = 0; pj < polytopes.size() && !inside_other; ++pj)
                    if (pj != pi && strictly_inside(smp, polytopes[pj])) inside_other = true;
                if (!inside_other) {
                    hidden = false;
                    break;
                }
            }
            if (hidden) continue;
            std::vector<int> out_loop;
            for (int id : loop) out_loop.push_back(id + offset[pi]);
            mesh.faces.push_back(std::move(out_loop));
            mesh.face_source.emplace_back(poly.source_convex, poly.face_plane[f]);
        }
    }
    return mesh;
}

PolyMesh assemble_union_2d(const std::vector<ConvexPolygon>& polygons) {
    PolyMesh mesh;
    mesh.dim = 2;
    std::vector<int> offset;
    for (const auto& poly : polygons) {
        offset.push_back(int(mesh.vertices.size()));
        for (const Vec2& v : poly.vertices) mesh.vertices.push_back({v[0], v[1], 0.0});
    }
    for (size_t pi = 0; pi < polygons.size(); ++pi) {
        const auto& poly = polygons[pi];
        size_t nv = poly.vertices.size();
        for (size_t e = 0; e < nv; ++e) {
            const Vec2& a = poly.vertices[e];
            const Vec2& b = poly.vertices[(e + 1) % nv];
            Vec2 mid = {(a[0] + b[0]) / 2, (a[1] + b[1]) / 2};
            std::vector<Vec2> samples = {mid};
            for (int k = 0; k < 16; ++k) {
                const Vec2& v = (k % 2 == 0) ? a : b;
                double fr = 0.95 * double(k / 2 + 1) / 9.0;
                samples.push_back({mid[0] + fr * (v[0] - mid[0]), mid[1] + fr * (v[1] - mid[1])});
            }
            bool hidden = true;
            for (const Vec2& smp : samples) {
                bool inside_other = false;
                for (size_t pj = 0; pj < polygons.size() && !inside_other; ++pj)
                    if (pj != pi && strictly_inside_2d(smp, polygons[pj])) inside_other = true;
                if (!inside_other) {
                    hidden = false;
                    break;
                }
            }
            if (hidden) continue;
            mesh.faces.push_back({int(e) + offset[pi], int((e + 1) % nv) + offset[pi]});
            mesh.face_source.emplace_back(poly.source_convex, poly.edge_plane[e]);
        }
    }
    return mesh;
}

std::vector<char> prune_convexes(const std::vector<std::vector<Halfspace>>& convexes, int dim,
                                 int resolution) {
    const int r = resolution;
    const size_t cells = dim == 3 ? size_t(r) * size_t(r) * size_t(r) : size_t(r) * size_t(r);
    const size_t words = (cells + 63) / 64;
    std::vector<std::vector<uint64_t>> occ(convexes.size(), std::vector<uint64_t>(words, 0));

    for (size_t j = 0; j < convexes.size(); ++j) {
        const auto& hss = convexes[j];
        if (hss.empty()) continue; // degenerate selection: never meshed, never occupies
        size_t cell = 0;
        int zmax = dim == 3 ? r : 1;
        for (int z = 0; z < zmax; ++z)
            for (int y = 0; y < r; ++y)
                for (int x = 0; x < r; ++x, ++cell) {
                    Vec3 p = {(x + 0.5) / r - 0.5, (y + 0.5) / r - 0.5,
                              dim == 3 ? (z + 0.5) / r - 0.5 : 0.0};
                    bool inside = true;
                    for (const Halfspace& hs : hss)
                        if (hs.eval(p) > 0.0) {
                            inside = false;
                            break;
                        }
                    if (inside) occ[j][cell / 64] |= (uint64_t(1) << (cell % 64));
                }
    }

    std::vector<char> keep(convexes.size(), 1);
    for (size_t j = 0; j < convexes.size(); ++j)
        if (convexes[j].empty()) keep[j] = 0;

    std::vector<uint64_t> full(words, 0);
    for (size_t j = 0; j < convexes.size(); ++j)
        if (keep[j])
            for (size_t w = 0; w < words; ++w) full[w] |= occ[j][w];

    for (size_t j = 0; j < convexes.size(); ++j) {
        if (!keep[j]) continue;
        std::vector<uint64_t> without(words, 0);
        for (size_t k = 0; k < convexes.size(); ++k)
            if (keep[k] && k != j)
                for (size_t w = 0; w < words; ++w) without[w] |= occ[k][w];
        if (without == full) keep[j] = 0;
    }
    return keep;
}

TriMesh triangulate(const PolyMesh& mesh) {
    TriMesh out;
    out.vertices = mesh.vertices;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& loop = mesh.faces[f];
        if (loop.size() < 3) {
            ++out.dropped_faces;
            continue;
        }
        for (size_t k = 1; k + 1 < loop.size(); ++k) {
            out.tris.push_back({loop[0], loop[k], loop[k + 1]});
            out.tri_source.push_back(mesh.face_source[f]);
        }
    }
    return out;
}

bool edges_two_manifold(const std::vector<std::vector<int>>& faces) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& loop : faces)
        for (size_t i = 0; i < loop.size(); ++i) {
            int u = loop[i], v = loop[(i + 1) % loop.size()];
            ++count[{u, v}];
        }
    for (const auto& [edge, n] : count) {
        auto rev = count.find({edge.second, edge.first});
        if (n != 1 || rev == count.end() || rev->second != 1) return false;
    }
    return true;
}

} // namespace bsp
