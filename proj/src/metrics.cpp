#include "bsp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "bsp/rng.hpp"

namespace bsp {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }
double dist2(const Vec3& a, const Vec3& b) {
    double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

} // namespace

SurfaceSampling sample_surface(const PolyMesh& mesh, int k, uint64_t seed) {
    if (mesh.faces.empty()) throw std::invalid_argument("sample_surface: mesh has no faces");
    SurfaceSampling out;
    out.dim = mesh.dim;
    if (k == 0) return out;

    Rng rng(seed);
    if (mesh.dim == 3) {
        TriMesh tri = triangulate(mesh);
        std::vector<double> cumulative;
        std::vector<Vec3> normals;
        double total = 0;
        for (const auto& t : tri.tris) {
            Vec3 n = cross(sub(tri.vertices[size_t(t[1])], tri.vertices[size_t(t[0])]),
                           sub(tri.vertices[size_t(t[2])], tri.vertices[size_t(t[0])]));
            double area = 0.5 * norm(n);
            total += area;
            cumulative.push_back(total);
            double len = norm(n);
            normals.push_back(len > 0 ? Vec3{n[0] / len, n[1] / len, n[2] / len} : Vec3{0, 0, 0});
        }
        if (total <= 0) throw std::invalid_argument("sample_surface: zero-area mesh");
        for (int i = 0; i < k; ++i) {
            double u = rng.unit() * total;
            size_t f = size_t(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                              cumulative.begin());
            if (f >= tri.tris.size()) f = tri.tris.size() - 1;
            double u1 = rng.unit(), u2 = rng.unit();
            if (u1 + u2 > 1.0) {
                u1 = 1.0 - u1;
                u2 = 1.0 - u2;
            }
            const auto& t = tri.tris[f];
            const Vec3& a = tri.vertices[size_t(t[0])];
            const Vec3& b = tri.vertices[size_t(t[1])];
            const Vec3& c = tri.vertices[size_t(t[2])];
            out.points.push_back({a[0] + u1 * (b[0] - a[0]) + u2 * (c[0] - a[0]),
                                  a[1] + u1 * (b[1] - a[1]) + u2 * (c[1] - a[1]),
                                  a[2] + u1 * (b[2] - a[2]) + u2 * (c[2] - a[2])});
            out.normals.push_back(normals[f]);
        }
        return out;
    }

    // 2D: faces are directed edges of CCW polygons; outward normal is the
    // right-hand side of the direction
    std::vector<double> cumulative;
    std::vector<Vec3> normals;
    double total = 0;
    for (const auto& e : mesh.faces) {
        const Vec3& a = mesh.vertices[size_t(e[0])];
        const Vec3& b = mesh.vertices[size_t(e[1])];
        double dx = b[0] - a[0], dy = b[1] - a[1];
        double len = std::sqrt(dx * dx + dy * dy);
        total += len;
        cumulative.push_back(total);
        normals.push_back(len > 0 ? Vec3{dy / len, -dx / len, 0} : Vec3{0, 0, 0});
    }
    if (total <= 0) throw std::invalid_argument("sample_surface: zero-length boundary");
    for (int i = 0; i < k; ++i) {
        double u = rng.unit() * total;
        size_t f = size_t(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                          cumulative.begin());
        if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
        double t = rng.unit();
        const Vec3& a = mesh.vertices[size_t(mesh.faces[f][0])];
        const Vec3& b = mesh.vertices[size_t(mesh.faces[f][1])];
        out.points.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), 0});
        out.normals.push_back(normals[f]);
    }
    return out;
}

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_distance: empty point set");
    auto directional = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0;
        for (const Vec3& p : from) {
            double best = dist2(p, to[0]);
            for (size_t j = 1; j < to.size(); ++j) best = std::min(best, dist2(p, to[j]));
            sum += best;
        }
        return sum / double(from.size());
    };
    return 1000.0 * (directional(a, b) + directional(b, a));
}

double normal_consistency(const SurfaceSampling& a, const SurfaceSampling& b) {
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("normal_consistency: empty sampling");
    auto directional = [](const SurfaceSampling& from, const SurfaceSampling& to) {
        double sum = 0;
        for (size_t i = 0; i < from.points.size(); ++i) {
            double best = dist2(from.points[i], to.points[0]);
            size_t nn = 0;
            for (size_t j = 1; j < to.points.size(); ++j) {
                double d = dist2(from.points[i], to.points[j]);
                if (d < best) {
                    best = d;
                    nn = j;
                }
            }
            const Vec3& na = from.normals[i];
            const Vec3& nb = to.normals[nn];
            sum += std::abs(na[0] * nb[0] + na[1] * nb[1] + na[2] * nb[2]);
        }
        return sum / double(from.points.size());
    };
    return 0.5 * (directional(a, b) + directional(b, a));
}

namespace {

// uniform grid for fixed-radius neighbor queries
struct NeighborGrid {
    double cell;
    std::unordered_map<uint64_t, std::vector<int>> bins;

    static uint64_t key(int64_t x, int64_t y, int64_t z) {
        return (uint64_t(uint32_t(x)) * 0x9e3779b1ull) ^ (uint64_t(uint32_t(y)) * 0x85ebca6bull) ^
               (uint64_t(uint32_t(z)) * 0xc2b2ae35ull);
    }
    explicit NeighborGrid(const std::vector<Vec3>& pts, double cell_size) : cell(cell_size) {
        for (size_t i = 0; i < pts.size(); ++i)
            bins[key(int64_t(std::floor(pts[i][0] / cell)), int64_t(std::floor(pts[i][1] / cell)),
                     int64_t(std::floor(pts[i][2] / cell)))]
                .push_back(int(i));
    }
    template <typename Fn>
    void for_neighbors(const Vec3& p, Fn&& fn) const {
        int64_t cx = int64_t(std::floor(p[0] / cell));
        int64_t cy = int64_t(std::floor(p[1] / cell));
        int64_t cz = int64_t(std::floor(p[2] / cell));
        for (int64_t dz = -1; dz <= 1; ++dz)
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    auto it = bins.find(key(cx + dx, cy + dy, cz + dz));
                    if (it == bins.end()) continue;
                    for (int idx : it->second) fn(idx);
                }
    }
};

} // namespace

SurfaceSampling edge_sampling(const SurfaceSampling& s, double epsilon, double threshold) {
    SurfaceSampling out;
    out.dim = s.dim;
    if (s.points.empty()) return out;
    NeighborGrid grid(s.points, epsilon);
    const double eps2 = epsilon * epsilon;
    for (size_t i = 0; i < s.points.size(); ++i) {
        double sigma = 1.0;
        bool any = false;
        grid.for_neighbors(s.points[i], [&](int j) {
            if (size_t(j) == i) return;
            if (dist2(s.points[i], s.points[size_t(j)]) > eps2) return;
            const Vec3& na = s.normals[i];
            const Vec3& nb = s.normals[size_t(j)];
            double dot = std::abs(na[0] * nb[0] + na[1] * nb[1] + na[2] * nb[2]);
            sigma = any ? std::min(sigma, dot) : dot;
            any = true;
        });
        if (!any) sigma = 1.0;
        if (sigma < threshold) {
            out.points.push_back(s.points[i]);
            out.normals.push_back(s.normals[i]);
        }
    }
    return out;
}

namespace {

Vec3 centroid_of(const SurfaceSampling& s) {
    Vec3 c = {0, 0, 0};
    for (const Vec3& p : s.points)
        for (int k = 0; k < 3; ++k) c[size_t(k)] += p[size_t(k)];
    for (int k = 0; k < 3; ++k) c[size_t(k)] /= double(s.points.size());
    return c;
}

} // namespace

double edge_chamfer_distance(const SurfaceSampling& a, const SurfaceSampling& b, double epsilon,
                             double threshold) {
    SurfaceSampling ea = edge_sampling(a, epsilon, threshold);
    SurfaceSampling eb = edge_sampling(b, epsilon, threshold);
    std::vector<Vec3> pa = ea.points.empty() ? std::vector<Vec3>{centroid_of(a)} : ea.points;
    std::vector<Vec3> pb = eb.points.empty() ? std::vector<Vec3>{centroid_of(b)} : eb.points;
    return chamfer_distance(pa, pb);
}

double edge_chamfer_distance(const PolyMesh& a, const PolyMesh& b, int k, uint64_t seed_a,
                             uint64_t seed_b, double epsilon, double threshold) {
    return edge_chamfer_distance(sample_surface(a, k, seed_a), sample_surface(b, k, seed_b),
                                 epsilon, threshold);
}

std::vector<int> argmin_rows(const Tensor<float>& values) {
    std::vector<int> out(size_t(values.dim(0)), 0);
    for (int i = 0; i < values.dim(0); ++i) {
        int best = 0;
        for (int j = 1; j < values.dim(1); ++j)
            if (values.at(i, j) < values.at(i, best)) best = j;
        out[size_t(i)] = best;
    }
    return out;
}

std::vector<int> vote_labels(const std::vector<int>& point_convex,
                             const std::vector<int>& point_labels, int num_convexes,
                             int num_labels) {
    if (point_convex.size() != point_labels.size())
        throw std::invalid_argument("vote_labels: mismatched point counts");
    std::vector<std::vector<long>> votes(size_t(num_convexes), std::vector<long>(size_t(num_labels), 0));
    for (size_t i = 0; i < point_convex.size(); ++i) {
        int c = point_convex[i], l = point_labels[i];
        if (c < 0 || l < 0) continue;
        ++votes[size_t(c)][size_t(l)];
    }
    std::vector<int> out(size_t(num_convexes), -1);
    for (int c = 0; c < num_convexes; ++c) {
        long best = 0;
        int label = -1;
        for (int l = 0; l < num_labels; ++l)
            if (votes[size_t(c)][size_t(l)] > best) {
                best = votes[size_t(c)][size_t(l)];
                label = l;
            }
        out[size_t(c)] = label;
    }
    return out;
}

double per_label_iou(const std::vector<int>& predicted, const std::vector<int>& ground_truth,
                     int num_labels) {
    if (predicted.size() != ground_truth.size())
        throw std::invalid_argument("per_label_iou: mismatched point counts");
    double sum = 0;
    int counted = 0;
    for (int l = 0; l < num_labels; ++l) {
        long inter = 0, uni = 0, gt_count = 0;
        for (size_t i = 0; i < predicted.size(); ++i) {
            bool p = predicted[i] == l, g = ground_truth[i] == l;
            if (g) ++gt_count;
            if (p && g) ++inter;
            if (p || g) ++uni;
        }
        if (gt_count == 0) continue;
        sum += double(inter) / double(uni);
        ++counted;
    }
    return counted > 0 ? sum / double(counted) : 0.0;
}

} // namespace bsp
