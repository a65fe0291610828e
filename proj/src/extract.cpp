#include "bsp/extract.hpp"

#include "bsp/losses.hpp"

namespace bsp {

ExtractedShape extract_shape(const BspModel<double>& model, const Tensor<double>& code,
                             const ExtractOptions& opts) {
    if (model.cfg.is_qs())
        throw std::invalid_argument("extract_shape: quadric primitives have no mesh extraction");
    ExtractedShape out;
    out.planes = predict_planes(model, code);
    const Tensor<double>& t = model.params[model.selection];
    out.t_binary = model.cfg.binary_t ? t : quantize_selection(t, opts.lambda);

    auto convexes = shape_halfspaces(out.planes, out.t_binary, model.cfg.dim, &out.skipped_planes);
    std::vector<char> keep(convexes.size(), 1);
    for (size_t j = 0; j < convexes.size(); ++j)
        if (convexes[j].empty()) keep[j] = 0; // degenerate selection column
    if (opts.prune) {
        int res = opts.prune_resolution > 0 ? opts.prune_resolution
                                            : (model.cfg.dim == 2 ? 64 : 32);
        std::vector<char> pruned = prune_convexes(convexes, model.cfg.dim, res);
        for (size_t j = 0; j < convexes.size(); ++j) {
            if (keep[j] && !pruned[j]) ++out.pruned_convexes;
            keep[j] = keep[j] && pruned[j];
        }
    }

    if (model.cfg.dim == 2) {
        for (size_t j = 0; j < convexes.size(); ++j) {
            if (!keep[j]) continue;
            auto poly = extract_polygon_2d(convexes[j], opts.box_half, int(j));
            if (poly) out.polygons.push_back(std::move(*poly));
        }
        out.convex_count = int(out.polygons.size());
        out.mesh = assemble_union_2d(out.polygons);
    } else {
        for (size_t j = 0; j < convexes.size(); ++j) {
            if (!keep[j]) continue;
            auto poly = extract_polytope(convexes[j], opts.box_half, int(j));
            if (poly) out.polytopes.push_back(std::move(*poly));
        }
        out.convex_count = int(out.polytopes.size());
        out.mesh = assemble_union(out.polytopes);
    }
    return out;
}

PolyMesh raster_boundary_2d(const Shape2D& shape) {
    PolyMesh mesh;
    mesh.dim = 2;
    const int r = Shape2D::res;
    auto occupied = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= r || y >= r) return false;
        return shape.pixel(x, y) != 0;
    };
    auto coord = [&](int i) { return double(i) / r - 0.5; };
    auto add_edge = [&](double x0, double y0, double x1, double y1) {
        int base = int(mesh.vertices.size());
        mesh.vertices.push_back({x0, y0, 0});
        mesh.vertices.push_back({x1, y1, 0});
        mesh.faces.push_back({base, base + 1});
        mesh.face_source.emplace_back(-1, -1);
    };
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) {
            if (!occupied(x, y)) continue;
            double x0 = coord(x), x1 = coord(x + 1), y0 = coord(y), y1 = coord(y + 1);
            // directed so that (dy, -dx) points outward
            if (!occupied(x - 1, y)) add_edge(x0, y1, x0, y0);
            if (!occupied(x + 1, y)) add_edge(x1, y0, x1, y1);
            if (!occupied(x, y - 1)) add_edge(x0, y0, x1, y0);
            if (!occupied(x, y + 1)) add_edge(x1, y1, x0, y1);
        }
    return mesh;
}

PolyMesh voxel_boundary_3d(const Shape3D& shape, int resolution) {
    PolyMesh mesh;
    mesh.dim = 3;
    const int r = resolution;
    const auto& grid = shape.grids.at(resolution);
    auto occupied = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= r || y >= r || z >= r) return false;
        return grid[size_t(x) + size_t(r) * (size_t(y) + size_t(r) * size_t(z))] != 0;
    };
    auto coord = [&](int i) { return double(i) / r - 0.5; };
    auto quad = [&](Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
        int base = int(mesh.vertices.size());
        mesh.vertices.push_back(a);
        mesh.vertices.push_back(b);
        mesh.vertices.push_back(c);
        mesh.vertices.push_back(d);
        mesh.faces.push_back({base, base + 1, base + 2, base + 3});
        mesh.face_source.emplace_back(-1, -1);
    };
    for (int z = 0; z < r; ++z)
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                if (!occupied(x, y, z)) continue;
                double x0 = coord(x), x1 = coord(x + 1);
                double y0 = coord(y), y1 = coord(y + 1);
                double z0 = coord(z), z1 = coord(z + 1);
                if (!occupied(x + 1, y, z))
                    quad({x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1});
                if (!occupied(x - 1, y, z))
                    quad({x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1}, {x0, y1, z0});
                if (!occupied(x, y + 1, z))
                    quad({x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1}, {x1, y1, z0});
                if (!occupied(x, y - 1, z))
                    quad({x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1});
                if (!occupied(x, y, z + 1))
                    quad({x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1});
                if (!occupied(x, y, z - 1))
                    quad({x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0});
            }
    return mesh;
}

} // namespace bsp
