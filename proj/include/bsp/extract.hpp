#pragma once

#include "bsp/dataset.hpp"
#include "bsp/model.hpp"
#include "bsp/polytope.hpp"

namespace bsp {

struct ExtractOptions {
    double lambda = 0.01;
    bool prune = true;
    int prune_resolution = 0; // 0: 64 in 2D, 32 in 3D
    double box_half = 0.55;
};

struct ExtractedShape {
    std::vector<ConvexPolytope> polytopes; // 3D
    std::vector<ConvexPolygon> polygons;   // 2D
    PolyMesh mesh;
    Tensor<double> planes;
    Tensor<double> t_binary;
    int convex_count = 0; // non-empty convexes in the output
    int skipped_planes = 0;
    int pruned_convexes = 0;
};

// Quantize (if needed), intersect half-spaces per convex, optionally prune,
// and assemble the union surface.
ExtractedShape extract_shape(const BspModel<double>& model, const Tensor<double>& code,
                             const ExtractOptions& opts = {});

// Axis-aligned boundary meshes of rasters/voxel grids, used as ground truth
// for the distance metrics.
PolyMesh raster_boundary_2d(const Shape2D& shape);
PolyMesh voxel_boundary_3d(const Shape3D& shape, int resolution);

} // namespace bsp
