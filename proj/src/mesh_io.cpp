#include "bsp/mesh_io.hpp"

#include <cstdio>
#include <fstream>

namespace bsp {

void write_obj(const PolyMesh& mesh, const std::string& path, bool triangulated) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_obj: cannot open " + path);
    char buf[160];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
        os << buf;
    }
    auto emit = [&](const std::vector<int>& loop, std::pair<int, int> source) {
        os << "# face convex " << source.first << " plane " << source.second << "\n";
        os << "f";
        for (int id : loop) os << " " << id + 1;
        os << "\n";
    };
    if (!triangulated) {
        for (size_t f = 0; f < mesh.faces.size(); ++f) emit(mesh.faces[f], mesh.face_source[f]);
    } else {
        TriMesh tri = triangulate(mesh);
        for (size_t f = 0; f < tri.tris.size(); ++f)
            emit({tri.tris[f][0], tri.tris[f][1], tri.tris[f][2]}, tri.tri_source[f]);
    }
    if (!os) throw std::runtime_error("write_obj: write failed for " + path);
}

void write_svg(const std::vector<ConvexPolygon>& polygons, const std::string& path, int size) {
    static const char* palette[] = {"#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231",
                                    "#911eb4", "#46f0f0", "#f032e6", "#bcf60c", "#fabebe",
                                    "#008080", "#e6beff", "#9a6324", "#fffac8", "#800000",
                                    "#aaffc3"};
    constexpr int palette_size = 16;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_svg: cannot open " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
       << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
    os << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
    char buf[64];
    for (const auto& poly : polygons) {
        if (poly.vertices.size() < 3) continue;
        os << "<path d=\"";
        for (size_t i = 0; i < poly.vertices.size(); ++i) {
            double x = (poly.vertices[i][0] + 0.5) * size;
            double y = (poly.vertices[i][1] + 0.5) * size;
            std::snprintf(buf, sizeof buf, "%c%.2f %.2f ", i == 0 ? 'M' : 'L', x, y);
            os << buf;
        }
        int color = poly.source_convex >= 0 ? poly.source_convex % palette_size : 0;
        os << "Z\" fill=\"" << palette[color] << "\" fill-opacity=\"0.85\" stroke=\"black\" "
           << "stroke-width=\"0.5\"><title>convex " << poly.source_convex << "</title></path>\n";
    }
    os << "</svg>\n";
    if (!os) throw std::runtime_error("write_svg: write failed for " + path);
}

namespace {

uint32_t crc32_update(uint32_t crc, const uint8_t* data, size_t len) {
    static uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    crc ^= 0xffffffffu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

void push_u32_be(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

void write_chunk(std::ostream& os, const char type[4], const std::vector<uint8_t>& data) {
    std::vector<uint8_t> head;
    push_u32_be(head, uint32_t(data.size()));
    os.write(reinterpret_cast<const char*>(head.data()), 4);
    os.write(type, 4);
    if (!data.empty()) os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    uint32_t crc = crc32_update(0, reinterpret_cast<const uint8_t*>(type), 4);
    if (!data.empty()) crc = crc32_update(crc, data.data(), data.size());
    std::vector<uint8_t> tail;
    push_u32_be(tail, crc);
    os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

} // namespace

void write_png_gray8(const std::vector<uint8_t>& pixels, int width, int height,
                     const std::string& path) {
    if (int(pixels.size()) != width * height)
        throw std::invalid_argument("write_png_gray8: pixel count does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_png_gray8: cannot open " + path);
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    push_u32_be(ihdr, uint32_t(width));
    push_u32_be(ihdr, uint32_t(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(os, "IHDR", ihdr);

    // raw scanlines with filter byte 0
    std::vector<uint8_t> raw;
    raw.reserve(size_t(height) * size_t(width + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < width; ++x) raw.push_back(pixels[size_t(y) * size_t(width) + size_t(x)]);
    }

    std::vector<uint8_t> idat;
    idat.push_back(0x78);
    idat.push_back(0x01);
    size_t pos = 0;
    while (pos < raw.size()) {
        size_t len = std::min<size_t>(65535, raw.size() - pos);
        bool final = pos + len == raw.size();
        idat.push_back(final ? 1 : 0);
        idat.push_back(uint8_t(len & 0xff));
        idat.push_back(uint8_t(len >> 8));
        idat.push_back(uint8_t(~len & 0xff));
        idat.push_back(uint8_t((~len >> 8) & 0xff));
        idat.insert(idat.end(), raw.begin() + std::ptrdiff_t(pos), raw.begin() + std::ptrdiff_t(pos + len));
        pos += len;
    }
    uint32_t a = 1, b = 0;
    for (uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    push_u32_be(idat, (b << 16) | a);
    write_chunk(os, "IDAT", idat);
    write_chunk(os, "IEND", {});
    if (!os) throw std::runtime_error("write_png_gray8: write failed for " + path);
}

} // namespace bsp
