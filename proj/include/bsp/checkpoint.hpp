#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bsp/model.hpp"

namespace bsp {

// Checkpoint container: a key/value text manifest listing config and tensor
// shapes, then one little-endian float32 blob with every tensor in manifest
// order. Round-trips bit-exactly.

inline void write_f32_le(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    char b[4] = {char(bits & 0xff), char((bits >> 8) & 0xff),
                 char((bits >> 16) & 0xff), char((bits >> 24) & 0xff)};
    os.write(b, 4);
}

inline float read_f32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t bits = uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
                    (uint32_t(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

template <typename S>
void save_checkpoint(const BspModel<S>& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    const ModelConfig& c = m.cfg;
    os << "bspnet 1\n";
    os << "variant " << variant_name(c.variant) << "\n";
    os << "dim " << c.dim << "\n";
    os << "planes " << c.planes << "\n";
    os << "convexes " << c.convexes << "\n";
    os << "stage " << c.stage << "\n";
    os << "tmode " << (c.binary_t ? "binary" : "continuous") << "\n";
    os << "encoder " << (c.encoder == EncoderKind::conv2d ? "conv2d" : "latent") << "\n";
    os << "image " << c.image_size << "\n";
    os << "enc_channels " << c.enc_channels << "\n";
    os << "code " << c.code_size << "\n";
    os << "latent_count " << c.latent_count << "\n";
    os << "tensors " << m.params.count() << "\n";
    size_t total = 0;
    for (int i = 0; i < m.params.count(); ++i) {
        const auto& e = m.params.entries[size_t(i)];
        os << "tensor " << i << " " << e.name;
        for (int d : e.value.shape) os << " " << d;
        os << "\n";
        total += e.value.numel();
    }
    os << "blob " << total * 4 << "\n";
    for (const auto& e : m.params.entries)
        for (S v : e.value.data) write_f32_le(os, float(v));
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

namespace detail {
inline std::string expect_key(std::istream& is, const std::string& key) {
    std::string k, v;
    if (!(is >> k >> v) || k != key)
        throw std::runtime_error("checkpoint: expected key '" + key + "', got '" + k + "'");
    return v;
}
} // namespace detail

template <typename S>
BspModel<S> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string magic, version;
    is >> magic >> version;
    if (magic != "bspnet" || version != "1")
        throw std::runtime_error("checkpoint: bad header in " + path);
    ModelConfig c;
    c.variant = variant_from_name(detail::expect_key(is, "variant"));
    c.dim = std::stoi(detail::expect_key(is, "dim"));
    c.planes = std::stoi(detail::expect_key(is, "planes"));
    c.convexes = std::stoi(detail::expect_key(is, "convexes"));
    c.stage = std::stoi(detail::expect_key(is, "stage"));
    c.binary_t = detail::expect_key(is, "tmode") == "binary";
    c.encoder = detail::expect_key(is, "encoder") == "latent" ? EncoderKind::latent
                                                              : EncoderKind::conv2d;
    c.image_size = std::stoi(detail::expect_key(is, "image"));
    c.enc_channels = std::stoi(detail::expect_key(is, "enc_channels"));
    c.code_size = std::stoi(detail::expect_key(is, "code"));
    c.latent_count = std::stoi(detail::expect_key(is, "latent_count"));
    int ntensors = std::stoi(detail::expect_key(is, "tensors"));

    BspModel<S> m = BspModel<S>::init(c, 0);
    if (m.params.count() != ntensors)
        throw std::runtime_error("checkpoint: tensor count mismatch in " + path);

    std::string line;
    std::getline(is, line); // consume end of "tensors" line
    for (int i = 0; i < ntensors; ++i) {
        std::getline(is, line);
        std::istringstream ls(line);
        std::string tag, name;
        int index;
        ls >> tag >> index >> name;
        if (tag != "tensor" || index != i)
            throw std::runtime_error("checkpoint: malformed tensor line " + std::to_string(i));
        std::vector<int> shape;
        int d;
        while (ls >> d) shape.push_back(d);
        const auto& e = m.params.entries[size_t(i)];
        if (e.name != name || e.value.shape != shape)
            throw std::runtime_error("checkpoint: tensor " + std::to_string(i) +
                                     " does not match model layout (" + name + ")");
    }
    std::getline(is, line);
    std::istringstream bs(line);
    std::string tag;
    size_t bytes;
    bs >> tag >> bytes;
    size_t expect = m.params.total_scalars() * 4;
    if (tag != "blob" || bytes != expect)
        throw std::runtime_error("checkpoint: blob size mismatch in " + path);
    for (auto& e : m.params.entries)
        for (S& v : e.value.data) v = S(read_f32_le(is));
    if (!is) throw std::runtime_error("checkpoint: truncated blob in " + path);
    return m;
}

} // namespace bsp
