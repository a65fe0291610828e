#pragma once

#include "bsp/polytope.hpp"

namespace bsp {

struct SurfaceSampling {
    int dim = 3;
    std::vector<Vec3> points;
    std::vector<Vec3> normals; // unit length
};

// Area-weighted (length-weighted in 2D) uniform surface sampling with face
// normals.
SurfaceSampling sample_surface(const PolyMesh& mesh, int k, uint64_t seed);

// Symmetric Chamfer Distance, squared-distance convention, sum of the two
// directional means, scaled by 1000.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Mean |n . n_nn| in both directions, averaged.
double normal_consistency(const SurfaceSampling& a, const SurfaceSampling& b);

// Sharpness sigma(s) = min over epsilon-neighbors (self excluded) of
// |n_i . n_j|; points with no neighbors get sigma = 1. Retains sigma < threshold.
SurfaceSampling edge_sampling(const SurfaceSampling& s, double epsilon = 0.01,
                              double threshold = 0.1);

// Chamfer Distance between edge samplings; an empty edge set falls back to
// the centroid of its surface sampling.
double edge_chamfer_distance(const SurfaceSampling& a, const SurfaceSampling& b,
                             double epsilon = 0.01, double threshold = 0.1);
double edge_chamfer_distance(const PolyMesh& a, const PolyMesh& b, int k = 16000,
                             uint64_t seed_a = 1, uint64_t seed_b = 2, double epsilon = 0.01,
                             double threshold = 0.1);

// Row-wise argmin with ties resolved to the lowest column index.
std::vector<int> argmin_rows(const Tensor<float>& values);

// Majority label per convex from point votes; ties resolve to the lowest
// label index; convexes with no voters get -1.
std::vector<int> vote_labels(const std::vector<int>& point_convex,
                             const std::vector<int>& point_labels, int num_convexes,
                             int num_labels);

// Mean per-label IoU over labels present in the ground truth.
double per_label_iou(const std::vector<int>& predicted, const std::vector<int>& ground_truth,
                     int num_labels);

} // namespace bsp
