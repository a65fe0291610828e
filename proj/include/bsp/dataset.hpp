#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bsp/tensor.hpp"

namespace bsp {

// Parse failure with the byte offset where the file stopped making sense.
struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " (byte " + std::to_string(off) + ")"), offset(off) {}
};

struct Shape2D {
    static constexpr int res = 64;
    int id = 0;
    std::vector<uint8_t> image;  // res*res, row-major (y*res+x), values {0,1}
    std::vector<uint8_t> labels; // 255 background; 0 diamond, 1 cross, 2 hollow diamond

    uint8_t pixel(int x, int y) const { return image[size_t(y) * res + size_t(x)]; }
};

struct Shape3D {
    int id = 0;
    // resolution -> D^3 occupancy, x-fastest (index = x + D*(y + D*z))
    std::map<int, std::vector<uint8_t>> grids;

    int base_resolution() const { return grids.empty() ? 0 : grids.rbegin()->first; }
    uint8_t cell(int r, int x, int y, int z) const {
        return grids.at(r)[size_t(x) + size_t(r) * (size_t(y) + size_t(r) * size_t(z))];
    }
};

struct ShapeSample {
    Tensor<double> points;         // n x (d+1), homogeneous, coords in [-0.5, 0.5]^d
    std::vector<double> occupancy; // n entries in {0,1}
    std::vector<size_t> cells;     // flat source cell per sample
};

// Synthetic 2D dataset: diamond / cross / hollow diamond, left to right,
// sizes and positions jittered per shape id.
std::vector<Shape2D> generate_synthetic_2d(int count, uint64_t seed);
Shape2D generate_shape_2d(int id, uint64_t seed);

// One sample per pixel center.
ShapeSample sample_2d(const Shape2D& shape);

// Transition-adjacent cell centers plus an equal count of uniform cells.
ShapeSample sample_3d(const Shape3D& shape, int resolution, uint64_t seed);

// Voxel container ("BSPV"): magic, three u32 LE dims, bit-packed occupancy.
Shape3D load_voxels(const std::string& path);
void save_voxels(const std::vector<uint8_t>& grid, int resolution, const std::string& path);
void save_image_bspv(const Shape2D& shape, const std::string& path);
Shape2D load_image_bspv(const std::string& path);

// Label raster ("BSPL"): magic, two u32 LE dims, one byte per pixel.
void save_labels(const Shape2D& shape, const std::string& path);
std::vector<uint8_t> load_labels(const std::string& path, int expect_res);

// Majority-vote 2x downsampling, ties occupied.
std::vector<uint8_t> downsample_majority(const std::vector<uint8_t>& grid, int resolution);

// Synthetic 3D voxel shapes (box / L / cross of boxes) for desk-scale runs.
Shape3D generate_shape_3d(int id, uint64_t seed, int resolution = 64);
std::vector<Shape3D> generate_synthetic_3d(int count, uint64_t seed, int resolution = 64);

// Dataset manifest: "bspdata <2d|3d>" header, then one line per shape.
struct ManifestEntry {
    int id;
    std::string voxel_path;
    std::string label_path; // empty if absent
};
struct Manifest {
    int dim = 2;
    std::vector<ManifestEntry> entries;
};
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

} // namespace bsp
