#pragma once

#include "bsp/rng.hpp"
#include "bsp/tape.hpp"

namespace bsp {

enum class Variant { original, fc, fc_deeper, fc_qs, fc_qs_deeper };
enum class EncoderKind { conv2d, latent };

inline const char* variant_name(Variant v) {
    switch (v) {
    case Variant::original: return "original";
    case Variant::fc: return "fc";
    case Variant::fc_deeper: return "fc_deeper";
    case Variant::fc_qs: return "fc_qs";
    case Variant::fc_qs_deeper: return "fc_qs_deeper";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "original") return Variant::original;
    if (s == "fc") return Variant::fc;
    if (s == "fc_deeper") return Variant::fc_deeper;
    if (s == "fc_qs") return Variant::fc_qs;
    if (s == "fc_qs_deeper") return Variant::fc_qs_deeper;
    throw std::runtime_error("unknown variant: " + s);
}

struct ModelConfig {
    int dim = 2;
    int planes = 256;    // p
    int convexes = 64;   // c
    Variant variant = Variant::original;
    EncoderKind encoder = EncoderKind::conv2d;
    int image_size = 64;    // conv encoder input resolution
    int enc_channels = 16;  // channels after the first conv layer
    int code_size = 256;
    int latent_count = 0;   // auto-decoder table rows
    int stage = 1;
    bool binary_t = false;

    bool is_fc() const { return variant != Variant::original; }
    bool is_qs() const { return variant == Variant::fc_qs || variant == Variant::fc_qs_deeper; }

    // parameters per primitive row: plane (d+1), quadric (10 in 3D, 6 in 2D)
    int primitive_params() const {
        if (is_qs()) return dim == 3 ? 10 : 6;
        return dim + 1;
    }
    std::vector<int> predictor_widths() const {
        return {512, 1024, 2048, primitive_params() * planes};
    }
    std::vector<int> fc_head_widths() const {
        if (variant == Variant::fc_deeper || variant == Variant::fc_qs_deeper)
            return {256, 256, 256, 1};
        return {512, 256, 1};
    }
};

template <typename S>
struct BspModel {
    ModelConfig cfg;
    ParamStore<S> params;

    std::vector<int> enc_w, enc_b; // four conv layers
    int enc_dense_w = -1, enc_dense_b = -1;
    int latent = -1;
    std::vector<int> mlp_w, mlp_b; // plane predictor (or single linear map for fc variants)
    std::vector<int> fc_w, fc_b;   // fc-head layers for the fc variants
    int selection = -1;            // T, p x c
    int aggregation = -1;          // W, c x 1

    static BspModel init(const ModelConfig& cfg, uint64_t seed) {
        BspModel m;
        m.cfg = cfg;
        Rng rng(substream(seed, 0x6d6f64656cull));
        auto gauss = [&](std::vector<int> shape, double sigma) {
            Tensor<S> t(shape);
            for (auto& v : t.data) v = S(rng.normal() * sigma);
            return t;
        };
        auto fanin = [&](std::vector<int> shape, int fan) {
            return gauss(std::move(shape), 1.0 / std::sqrt(double(fan)));
        };

        if (cfg.encoder == EncoderKind::conv2d) {
            int cin = 1;
            int cout = cfg.enc_channels;
            for (int layer = 0; layer < 4; ++layer) {
                m.enc_w.push_back(m.params.add("enc.conv" + std::to_string(layer) + ".w",
                                               fanin({4, 4, cin, cout}, 16 * cin)));
                m.enc_b.push_back(m.params.add("enc.conv" + std::to_string(layer) + ".b",
                                               Tensor<S>({cout})));
                cin = cout;
                cout *= 2;
            }
            int spatial = cfg.image_size / 16;
            int flat = spatial * spatial * cin;
            m.enc_dense_w = m.params.add("enc.dense.w", fanin({flat, cfg.code_size}, flat));
            m.enc_dense_b = m.params.add("enc.dense.b", Tensor<S>({cfg.code_size}));
        } else {
            m.latent = m.params.add("latent", gauss({cfg.latent_count, cfg.code_size}, 0.02));
        }

        if (cfg.variant == Variant::original) {
            int in = cfg.code_size;
            auto widths = cfg.predictor_widths();
            for (size_t i = 0; i < widths.size(); ++i) {
                m.mlp_w.push_back(m.params.add("mlp.l" + std::to_string(i) + ".w",
                                               fanin({in, widths[i]}, in)));
                m.mlp_b.push_back(m.params.add("mlp.l" + std::to_string(i) + ".b",
                                               Tensor<S>({widths[i]})));
                in = widths[i];
            }
            m.selection = m.params.add("selection", gauss({cfg.planes, cfg.convexes}, 0.02));
            m.aggregation = m.params.add("aggregation", gauss({cfg.convexes, 1}, 0.02));
        } else {
            int out = cfg.primitive_params() * cfg.planes;
            m.mlp_w.push_back(m.params.add("linear_map.w", fanin({cfg.code_size, out}, cfg.code_size)));
            m.mlp_b.push_back(m.params.add("linear_map.b", Tensor<S>({out})));
            int in = cfg.planes;
            auto widths = cfg.fc_head_widths();
            for (size_t i = 0; i < widths.size(); ++i) {
                m.fc_w.push_back(m.params.add("fc.l" + std::to_string(i) + ".w",
                                              fanin({in, widths[i]}, in)));
                m.fc_b.push_back(m.params.add("fc.l" + std::to_string(i) + ".b",
                                              Tensor<S>({widths[i]})));
                in = widths[i];
            }
        }
        return m;
    }

    template <typename T>
    BspModel<T> cast() const {
        BspModel<T> out;
        out.cfg = cfg;
        for (const auto& e : params.entries) out.params.add(e.name, e.value.template cast<T>());
        out.enc_w = enc_w;
        out.enc_b = enc_b;
        out.enc_dense_w = enc_dense_w;
        out.enc_dense_b = enc_dense_b;
        out.latent = latent;
        out.mlp_w = mlp_w;
        out.mlp_b = mlp_b;
        out.fc_w = fc_w;
        out.fc_b = fc_b;
        out.selection = selection;
        out.aggregation = aggregation;
        return out;
    }
};

// ---- graph builders -------------------------------------------------------

// Conv encoder: four stride-2 conv layers with leaky ReLU, then one dense
// layer to the feature code. Image enters as image_size x image_size x 1.
template <typename S>
int build_encoder(Tape<S>& t, const BspModel<S>& m, int image) {
    int x = image;
    for (size_t i = 0; i < m.enc_w.size(); ++i) {
        x = t.conv2d_s2(x, t.param(m.params, m.enc_w[i]), t.param(m.params, m.enc_b[i]), 1);
        x = t.act(x, Act::leaky_relu);
    }
    const Tensor<S>& v = t.val(x);
    int flat = v.dim(0) * v.dim(1) * v.dim(2);
    x = t.reshape(x, {1, flat});
    x = t.dense(x, t.param(m.params, m.enc_dense_w), t.param(m.params, m.enc_dense_b));
    return x; // 1 x code_size
}

template <typename S>
int build_latent_code(Tape<S>& t, const BspModel<S>& m, int shape_id) {
    if (shape_id < 0 || shape_id >= m.cfg.latent_count)
        throw std::invalid_argument("encode: unknown shape id " + std::to_string(shape_id));
    // selector product (1 x latent_count) * table picks one trainable row
    Tensor<S> sel({1, m.cfg.latent_count});
    sel.at(0, shape_id) = S(1);
    return t.matmul(t.constant(std::move(sel)), t.param(m.params, m.latent));
}

// Plane predictor: MLP with leaky ReLU hidden layers, linear output,
// reshaped to p x (d+1) (or p x 10 / p x 6 for quadrics).
template <typename S>
int build_planes(Tape<S>& t, const BspModel<S>& m, int code) {
    int x = code;
    const size_t layers = m.mlp_w.size();
    for (size_t i = 0; i < layers; ++i) {
        x = t.dense(x, t.param(m.params, m.mlp_w[i]), t.param(m.params, m.mlp_b[i]));
        if (i + 1 < layers) x = t.act(x, Act::leaky_relu);
    }
    return t.reshape(x, {m.cfg.planes, m.cfg.primitive_params()});
}

// D = x P^T over homogeneous points (n x (d+1)).
template <typename S>
int build_distances(Tape<S>& t, int points, int planes) {
    return t.matmul(points, planes, /*transpose_b=*/true);
}

// C+ = relu(D) T
template <typename S>
int build_convex_soft(Tape<S>& t, int distances, int selection) {
    return t.matmul(t.act(distances, Act::relu), selection);
}

// S+ = clip01( clip01(1 - C+) W )
template <typename S>
int build_shape_soft(Tape<S>& t, int convex, int aggregation) {
    int inner = t.act(t.affine(convex, S(-1), S(1)), Act::clip01);
    int mixed = t.matmul(inner, aggregation);
    int clipped = t.act(mixed, Act::clip01);
    return t.reshape(clipped, {t.val(clipped).dim(0)});
}

// S* = min_j C+_j over the active columns.
template <typename S>
int build_shape_hard(Tape<S>& t, int convex, const std::vector<int>& active) {
    if (active.empty()) throw std::invalid_argument("shape_hard: zero active convexes");
    int gathered = t.gather_cols(convex, active);
    return t.reduce_extremum(gathered, Extremum::min, 1);
}

// FC head of the BSP-FC variants: leaky ReLU before every dense layer and a
// leaky clip on the scalar output.
template <typename S>
int build_fc_head(Tape<S>& t, const ParamStore<S>& params, int distances,
                  const std::vector<int>& ws, const std::vector<int>& bs) {
    int x = distances;
    for (size_t i = 0; i < ws.size(); ++i) {
        x = t.act(x, Act::leaky_relu);
        x = t.dense(x, t.param(params, ws[i]), t.param(params, bs[i]));
    }
    x = t.act(x, Act::leaky_clip);
    return t.reshape(x, {t.val(x).dim(0)});
}

// ---- plain evaluation (no gradients) ---------------------------------------

template <typename S>
void check_homogeneous(const Tensor<S>& points) {
    if (points.rank() != 2)
        throw std::invalid_argument("signed_distances: points must be n x (d+1)");
    int last = points.dim(1) - 1;
    for (int i = 0; i < points.dim(0); ++i)
        if (points.at(i, last) != S(1))
            throw std::invalid_argument("signed_distances: points must be homogeneous with last coordinate 1");
}

template <typename S>
Tensor<S> signed_distances(const Tensor<S>& points, const Tensor<S>& planes) {
    check_homogeneous(points);
    if (planes.rank() != 2 || planes.dim(1) != points.dim(1))
        throw std::invalid_argument("signed_distances: planes must be p x " +
                                    std::to_string(points.dim(1)));
    Tensor<S> out({points.dim(0), planes.dim(0)});
    kernels::matmul_nt(points.data.data(), planes.data.data(), out.data.data(),
                       points.dim(0), points.dim(1), planes.dim(0));
    return out;
}

// Monomial basis for quadric evaluation; points are raw n x d coordinates.
template <typename S>
Tensor<S> quadric_basis(const Tensor<S>& points) {
    if (points.rank() != 2) throw std::invalid_argument("quadric_basis: points must be n x d");
    int n = points.dim(0), d = points.dim(1);
    if (d == 3) {
        Tensor<S> b({n, 10});
        for (int i = 0; i < n; ++i) {
            S x = points.at(i, 0), y = points.at(i, 1), z = points.at(i, 2);
            S* r = &b.data[size_t(i) * 10];
            r[0] = x * x; r[1] = y * y; r[2] = z * z;
            r[3] = y * z; r[4] = z * x; r[5] = x * y;
            r[6] = x; r[7] = y; r[8] = z; r[9] = S(1);
        }
        return b;
    }
    if (d == 2) {
        Tensor<S> b({n, 6});
        for (int i = 0; i < n; ++i) {
            S x = points.at(i, 0), y = points.at(i, 1);
            S* r = &b.data[size_t(i) * 6];
            r[0] = x * x; r[1] = y * y; r[2] = x * y;
            r[3] = x; r[4] = y; r[5] = S(1);
        }
        return b;
    }
    throw std::invalid_argument("quadric_basis: d must be 2 or 3");
}

template <typename S>
Tensor<S> quadric_distances(const Tensor<S>& points, const Tensor<S>& quadrics) {
    Tensor<S> basis = quadric_basis(points);
    if (quadrics.rank() != 2 || quadrics.dim(1) != basis.dim(1))
        throw std::invalid_argument("quadric_distances: quadrics must be p x " +
                                    std::to_string(basis.dim(1)));
    Tensor<S> out({points.dim(0), quadrics.dim(0)});
    kernels::matmul_nt(basis.data.data(), quadrics.data.data(), out.data.data(),
                       basis.dim(0), basis.dim(1), quadrics.dim(0));
    return out;
}

template <typename S>
Tensor<S> convex_soft(const Tensor<S>& distances, const Tensor<S>& selection) {
    Tensor<S> r(distances.shape);
    for (size_t i = 0; i < r.numel(); ++i) r[i] = distances[i] > S(0) ? distances[i] : S(0);
    Tensor<S> out({distances.dim(0), selection.dim(1)});
    kernels::matmul_nn(r.data.data(), selection.data.data(), out.data.data(),
                       distances.dim(0), distances.dim(1), selection.dim(1));
    return out;
}

// Hard convex values: max over selected plane distances. Evaluation only.
// Degenerate (all-zero) selection columns are flagged and left at zero; the
// caller must drop them before any union.
template <typename S>
Tensor<S> convex_hard(const Tensor<S>& distances, const Tensor<S>& selection,
                      std::vector<char>* degenerate = nullptr) {
    int n = distances.dim(0), p = distances.dim(1), c = selection.dim(1);
    Tensor<S> out({n, c});
    if (degenerate) degenerate->assign(size_t(c), 0);
    for (int j = 0; j < c; ++j) {
        std::vector<int> sel;
        for (int k = 0; k < p; ++k)
            if (selection.at(k, j) > S(0.5)) sel.push_back(k);
        if (sel.empty()) {
            if (degenerate) (*degenerate)[size_t(j)] = 1;
            continue;
        }
        for (int i = 0; i < n; ++i) {
            S best = distances.at(i, sel[0]);
            for (size_t k = 1; k < sel.size(); ++k) best = std::max(best, distances.at(i, sel[k]));
            out.at(i, j) = best;
        }
    }
    return out;
}

template <typename S>
Tensor<S> shape_hard(const Tensor<S>& convex, const std::vector<int>& active) {
    if (active.empty()) throw std::invalid_argument("shape_hard: zero active convexes");
    int n = convex.dim(0);
    Tensor<S> out({n});
    for (int i = 0; i < n; ++i) {
        S best = convex.at(i, active[0]);
        for (size_t k = 1; k < active.size(); ++k) best = std::min(best, convex.at(i, active[k]));
        out[size_t(i)] = best;
    }
    return out;
}

template <typename S>
Tensor<S> shape_soft(const Tensor<S>& convex, const Tensor<S>& aggregation) {
    int n = convex.dim(0), c = convex.dim(1);
    Tensor<S> out({n});
    for (int i = 0; i < n; ++i) {
        S acc = S(0);
        for (int j = 0; j < c; ++j) {
            S v = S(1) - convex.at(i, j);
            v = apply_act(Act::clip01, v);
            acc += aggregation[size_t(j)] * v;
        }
        out[size_t(i)] = apply_act(Act::clip01, acc);
    }
    return out;
}

// Columns of a binary selection matrix that select at least one plane.
template <typename S>
std::vector<int> active_columns(const Tensor<S>& selection) {
    std::vector<int> cols;
    for (int j = 0; j < selection.dim(1); ++j) {
        bool any = false;
        for (int k = 0; k < selection.dim(0) && !any; ++k) any = selection.at(k, j) > S(0.5);
        if (any) cols.push_back(j);
    }
    return cols;
}

template <typename S>
Tensor<S> predict_planes(const BspModel<S>& m, const Tensor<S>& code) {
    if (int(code.numel()) != m.cfg.code_size)
        throw std::invalid_argument("predict_planes: code length must be " +
                                    std::to_string(m.cfg.code_size));
    Tape<S> t;
    Tensor<S> c2 = code;
    c2.shape = {1, m.cfg.code_size};
    int planes = build_planes(t, m, t.constant(std::move(c2)));
    return t.val(planes);
}

template <typename S>
Tensor<S> linear_plane_map(const BspModel<S>& m, const Tensor<S>& code) {
    if (!m.cfg.is_fc())
        throw std::invalid_argument("linear_plane_map: model is not an fc variant");
    return predict_planes(m, code);
}

// Feature code from a 2D image (conv mode) or the latent table (auto-decoder).
template <typename S>
Tensor<S> encode(const BspModel<S>& m, const Tensor<S>& image) {
    if (m.cfg.encoder != EncoderKind::conv2d)
        throw std::invalid_argument("encode: model has no conv encoder");
    if (image.rank() != 3 || image.dim(0) != m.cfg.image_size ||
        image.dim(1) != m.cfg.image_size || image.dim(2) != 1)
        throw std::invalid_argument("encode: image must be " + std::to_string(m.cfg.image_size) +
                                    "x" + std::to_string(m.cfg.image_size) + "x1");
    Tape<S> t;
    int code = build_encoder(t, m, t.constant(image));
    Tensor<S> out = t.val(code);
    out.shape = {m.cfg.code_size};
    return out;
}

template <typename S>
Tensor<S> encode(const BspModel<S>& m, int shape_id) {
    if (m.cfg.encoder != EncoderKind::latent)
        throw std::invalid_argument("encode: model has no latent table");
    if (shape_id < 0 || shape_id >= m.cfg.latent_count)
        throw std::invalid_argument("encode: unknown shape id " + std::to_string(shape_id));
    const Tensor<S>& table = m.params[m.latent];
    Tensor<S> out({m.cfg.code_size});
    for (int k = 0; k < m.cfg.code_size; ++k) out[size_t(k)] = table.at(shape_id, k);
    return out;
}

template <typename S>
Tensor<S> bspfc_forward(const BspModel<S>& m, const Tensor<S>& distances) {
    if (!m.cfg.is_fc()) throw std::invalid_argument("bspfc_forward: model is not an fc variant");
    Tape<S> t;
    int out = build_fc_head(t, m.params, t.constant(distances), m.fc_w, m.fc_b);
    return t.val(out);
}

} // namespace bsp
