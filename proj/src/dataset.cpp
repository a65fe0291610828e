#include "bsp/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsp/rng.hpp"

namespace bsp {

namespace {

struct Glyph {
    int kind; // 0 diamond, 1 cross, 2 hollow diamond
    int cx, cy, h, t;
};

bool glyph_hit(const Glyph& g, int x, int y) {
    int dx = std::abs(x - g.cx), dy = std::abs(y - g.cy);
    switch (g.kind) {
    case 0: return dx + dy <= g.h;
    case 1: return (dx <= g.h && dy <= g.t) || (dx <= g.t && dy <= g.h);
    case 2: return dx + dy <= g.h && dx + dy >= g.h - g.t;
    }
    return false;
}

} // namespace

Shape2D generate_shape_2d(int id, uint64_t seed) {
    Rng rng(substream(seed, uint64_t(id)));
    Shape2D s;
    s.id = id;
    s.image.assign(Shape2D::res * Shape2D::res, 0);
    s.labels.assign(Shape2D::res * Shape2D::res, 255);

    // one glyph per horizontal third: diamond, cross, hollow diamond
    const int bounds[4] = {0, 21, 42, 64};
    Glyph glyphs[3];
    for (int k = 0; k < 3; ++k) {
        Glyph g;
        g.kind = k;
        g.h = rng.uniform_int(5, 9);
        int lo = bounds[k], hi = bounds[k + 1];
        g.cx = rng.uniform_int(lo + g.h + 1, hi - g.h - 2);
        g.cy = rng.uniform_int(g.h + 1, Shape2D::res - g.h - 2);
        if (k == 1) g.t = rng.uniform_int(1, std::min(3, g.h - 2));
        else if (k == 2) g.t = rng.uniform_int(2, std::min(4, g.h - 2));
        else g.t = 0;
        glyphs[k] = g;
    }
    for (int y = 0; y < Shape2D::res; ++y)
        for (int x = 0; x < Shape2D::res; ++x)
            for (int k = 0; k < 3; ++k)
                if (glyph_hit(glyphs[k], x, y)) {
                    s.image[size_t(y) * Shape2D::res + size_t(x)] = 1;
                    s.labels[size_t(y) * Shape2D::res + size_t(x)] = uint8_t(k);
                    break;
                }
    return s;
}

std::vector<Shape2D> generate_synthetic_2d(int count, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_synthetic_2d: count must be >= 1");
    std::vector<Shape2D> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i) out.push_back(generate_shape_2d(i, seed));
    return out;
}

ShapeSample sample_2d(const Shape2D& shape) {
    const int r = Shape2D::res;
    ShapeSample s;
    s.points = Tensor<double>({r * r, 3});
    s.occupancy.resize(size_t(r) * size_t(r));
    s.cells.resize(size_t(r) * size_t(r));
    size_t n = 0;
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x, ++n) {
            s.points.at(int(n), 0) = (x + 0.5) / r - 0.5;
            s.points.at(int(n), 1) = (y + 0.5) / r - 0.5;
            s.points.at(int(n), 2) = 1.0;
            s.occupancy[n] = shape.image[n];
            s.cells[n] = n;
        }
    return s;
}

ShapeSample sample_3d(const Shape3D& shape, int resolution, uint64_t seed) {
    auto it = shape.grids.find(resolution);
    if (it == shape.grids.end())
        throw std::invalid_argument("sample_3d: resolution " + std::to_string(resolution) +
                                    " not available for shape " + std::to_string(shape.id));
    const auto& g = it->second;
    const int r = resolution;
    auto at = [&](int x, int y, int z) {
        return g[size_t(x) + size_t(r) * (size_t(y) + size_t(r) * size_t(z))];
    };

    std::vector<size_t> picked;
    for (int z = 0; z < r; ++z)
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                uint8_t v = at(x, y, z);
                bool boundary =
                    (x > 0 && at(x - 1, y, z) != v) || (x + 1 < r && at(x + 1, y, z) != v) ||
                    (y > 0 && at(x, y - 1, z) != v) || (y + 1 < r && at(x, y + 1, z) != v) ||
                    (z > 0 && at(x, y, z - 1) != v) || (z + 1 < r && at(x, y, z + 1) != v);
                if (boundary)
                    picked.push_back(size_t(x) + size_t(r) * (size_t(y) + size_t(r) * size_t(z)));
            }
    size_t uniform = std::max(picked.size(), size_t(256));
    Rng rng(substream(seed, uint64_t(shape.id) * 1000003ull + uint64_t(resolution)));
    size_t total_cells = size_t(r) * size_t(r) * size_t(r);
    for (size_t i = 0; i < uniform; ++i) picked.push_back(size_t(rng.next_u64() % total_cells));

    ShapeSample s;
    s.points = Tensor<double>({int(picked.size()), 4});
    s.occupancy.resize(picked.size());
    s.cells = picked;
    for (size_t i = 0; i < picked.size(); ++i) {
        size_t cell = picked[i];
        int x = int(cell % size_t(r));
        int y = int((cell / size_t(r)) % size_t(r));
        int z = int(cell / (size_t(r) * size_t(r)));
        s.points.at(int(i), 0) = (x + 0.5) / r - 0.5;
        s.points.at(int(i), 1) = (y + 0.5) / r - 0.5;
        s.points.at(int(i), 2) = (z + 0.5) / r - 0.5;
        s.points.at(int(i), 3) = 1.0;
        s.occupancy[i] = g[cell];
    }
    return s;
}

std::vector<uint8_t> downsample_majority(const std::vector<uint8_t>& grid, int resolution) {
    const int r = resolution, h = resolution / 2;
    std::vector<uint8_t> out(size_t(h) * size_t(h) * size_t(h), 0);
    for (int z = 0; z < h; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < h; ++x) {
                int count = 0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            count += grid[size_t(2 * x + dx) +
                                          size_t(r) * (size_t(2 * y + dy) + size_t(r) * size_t(2 * z + dz))];
                out[size_t(x) + size_t(h) * (size_t(y) + size_t(h) * size_t(z))] = count >= 4 ? 1 : 0;
            }
    return out;
}

namespace {

void write_u32_le(std::ostream& os, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    os.write(b, 4);
}

uint32_t read_u32_le(std::istream& is, size_t& offset, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("voxel file: truncated " + what, offset);
    offset += 4;
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void write_bits(std::ostream& os, const std::vector<uint8_t>& cells) {
    size_t nbytes = (cells.size() + 7) / 8;
    std::vector<uint8_t> packed(nbytes, 0);
    for (size_t i = 0; i < cells.size(); ++i)
        if (cells[i]) packed[i / 8] |= uint8_t(1u << (i % 8));
    os.write(reinterpret_cast<const char*>(packed.data()), std::streamsize(packed.size()));
}

std::vector<uint8_t> read_bits(std::istream& is, size_t count, size_t& offset) {
    size_t nbytes = (count + 7) / 8;
    std::vector<uint8_t> packed(nbytes);
    is.read(reinterpret_cast<char*>(packed.data()), std::streamsize(nbytes));
    if (size_t(is.gcount()) != nbytes)
        throw ParseError("voxel file: truncated payload", offset + size_t(is.gcount()));
    offset += nbytes;
    std::vector<uint8_t> cells(count);
    for (size_t i = 0; i < count; ++i) cells[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return cells;
}

void check_magic(std::istream& is, size_t& offset, const std::string& path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "BSPV", 4) != 0)
        throw ParseError("voxel file: bad magic in " + path, 0);
    offset += 4;
}

} // namespace

void save_voxels(const std::vector<uint8_t>& grid, int resolution, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_voxels: cannot open " + path);
    os.write("BSPV", 4);
    write_u32_le(os, uint32_t(resolution));
    write_u32_le(os, uint32_t(resolution));
    write_u32_le(os, uint32_t(resolution));
    write_bits(os, grid);
    if (!os) throw std::runtime_error("save_voxels: write failed for " + path);
}

Shape3D load_voxels(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_voxels: cannot open " + path);
    size_t offset = 0;
    check_magic(is, offset, path);
    uint32_t dx = read_u32_le(is, offset, "dims");
    uint32_t dy = read_u32_le(is, offset, "dims");
    uint32_t dz = read_u32_le(is, offset, "dims");
    if (dx != dy || dy != dz || dx == 0 || dx > 512 || (dx & (dx - 1)) != 0)
        throw ParseError("voxel file: dims must be equal powers of two", 4);
    int r = int(dx);
    Shape3D s;
    s.grids[r] = read_bits(is, size_t(r) * size_t(r) * size_t(r), offset);
    while (r > 16) {
        s.grids[r / 2] = downsample_majority(s.grids[r], r);
        r /= 2;
    }
    return s;
}

void save_image_bspv(const Shape2D& shape, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_image_bspv: cannot open " + path);
    os.write("BSPV", 4);
    write_u32_le(os, Shape2D::res);
    write_u32_le(os, Shape2D::res);
    write_u32_le(os, 1);
    write_bits(os, shape.image);
    if (!os) throw std::runtime_error("save_image_bspv: write failed for " + path);
}

Shape2D load_image_bspv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_image_bspv: cannot open " + path);
    size_t offset = 0;
    check_magic(is, offset, path);
    uint32_t dx = read_u32_le(is, offset, "dims");
    uint32_t dy = read_u32_le(is, offset, "dims");
    uint32_t dz = read_u32_le(is, offset, "dims");
    if (dx != Shape2D::res || dy != Shape2D::res || dz != 1)
        throw ParseError("image file: expected 64x64x1 dims", 4);
    Shape2D s;
    s.image = read_bits(is, size_t(dx) * size_t(dy), offset);
    return s;
}

void save_labels(const Shape2D& shape, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_labels: cannot open " + path);
    os.write("BSPL", 4);
    write_u32_le(os, Shape2D::res);
    write_u32_le(os, Shape2D::res);
    os.write(reinterpret_cast<const char*>(shape.labels.data()),
             std::streamsize(shape.labels.size()));
    if (!os) throw std::runtime_error("save_labels: write failed for " + path);
}

std::vector<uint8_t> load_labels(const std::string& path, int expect_res) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_labels: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "BSPL", 4) != 0)
        throw ParseError("label file: bad magic in " + path, 0);
    size_t offset = 4;
    uint32_t dx = read_u32_le(is, offset, "dims");
    uint32_t dy = read_u32_le(is, offset, "dims");
    if (int(dx) != expect_res || int(dy) != expect_res)
        throw ParseError("label file: unexpected dims", 4);
    std::vector<uint8_t> labels(size_t(dx) * size_t(dy), 0);
    is.read(reinterpret_cast<char*>(labels.data()), std::streamsize(labels.size()));
    if (size_t(is.gcount()) != labels.size())
        throw ParseError("label file: truncated payload", offset + size_t(is.gcount()));
    return labels;
}

Shape3D generate_shape_3d(int id, uint64_t seed, int resolution) {
    Rng rng(substream(seed, 0x33d0ull + uint64_t(id)));
    const int r = resolution;
    std::vector<uint8_t> grid(size_t(r) * size_t(r) * size_t(r), 0);
    auto fill_box = [&](double x0, double y0, double z0, double x1, double y1, double z1) {
        int ix0 = std::max(0, int(x0 * r)), ix1 = std::min(r, int(x1 * r));
        int iy0 = std::max(0, int(y0 * r)), iy1 = std::min(r, int(y1 * r));
        int iz0 = std::max(0, int(z0 * r)), iz1 = std::min(r, int(z1 * r));
        for (int z = iz0; z < iz1; ++z)
            for (int y = iy0; y < iy1; ++y)
                for (int x = ix0; x < ix1; ++x)
                    grid[size_t(x) + size_t(r) * (size_t(y) + size_t(r) * size_t(z))] = 1;
    };
    double j = rng.uniform(0.0, 0.08);
    switch (id % 3) {
    case 0: // box
        fill_box(0.25 + j, 0.25, 0.3, 0.75, 0.75 - j, 0.7);
        break;
    case 1: // L shape
        fill_box(0.2, 0.2, 0.3, 0.8 - j, 0.45, 0.7);
        fill_box(0.2, 0.2, 0.3, 0.45, 0.8 - j, 0.7);
        break;
    default: // cross of two slabs
        fill_box(0.15 + j, 0.4, 0.35, 0.85 - j, 0.6, 0.65);
        fill_box(0.4, 0.15 + j, 0.35, 0.6, 0.85 - j, 0.65);
        break;
    }
    Shape3D s;
    s.id = id;
    s.grids[r] = std::move(grid);
    int cur = r;
    while (cur > 16) {
        s.grids[cur / 2] = downsample_majority(s.grids[cur], cur);
        cur /= 2;
    }
    return s;
}

std::vector<Shape3D> generate_synthetic_3d(int count, uint64_t seed, int resolution) {
    std::vector<Shape3D> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i) out.push_back(generate_shape_3d(i, seed, resolution));
    return out;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
    os << "bspdata " << (m.dim == 2 ? "2d" : "3d") << "\n";
    os << "count " << m.entries.size() << "\n";
    for (const auto& e : m.entries) {
        os << "shape " << e.id << " " << e.voxel_path;
        if (!e.label_path.empty()) os << " " << e.label_path;
        os << "\n";
    }
}

Manifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
    std::string magic, kind;
    is >> magic >> kind;
    if (magic != "bspdata" || (kind != "2d" && kind != "3d"))
        throw std::runtime_error("load_manifest: bad header in " + path);
    Manifest m;
    m.dim = kind == "2d" ? 2 : 3;
    std::string key;
    size_t count = 0;
    is >> key >> count;
    if (key != "count") throw std::runtime_error("load_manifest: missing count in " + path);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ManifestEntry e;
        ls >> tag >> e.id >> e.voxel_path;
        if (tag != "shape") throw std::runtime_error("load_manifest: malformed line: " + line);
        ls >> e.label_path;
        m.entries.push_back(e);
    }
    if (m.entries.size() != count)
        throw std::runtime_error("load_manifest: entry count mismatch in " + path);
    return m;
}

} // namespace bsp
