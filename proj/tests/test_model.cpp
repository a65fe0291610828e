#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "bsp/checkpoint.hpp"
#include "bsp/model.hpp"
#include "bsp/rng.hpp"

using namespace bsp;

namespace {

template <typename S>
Tensor<S> make(std::vector<int> shape, std::vector<S> values) {
    return Tensor<S>(std::move(shape), std::move(values));
}

// the unit square [-0.25, 0.25]^2 as four half-planes
Tensor<double> square_planes() {
    return make<double>({4, 3}, {1, 0, -0.25, -1, 0, -0.25, 0, 1, -0.25, 0, -1, -0.25});
}

} // namespace

TEST_CASE("predict_planes on the 2D default gives a 256x3 plane matrix") {
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.planes = 256;
    cfg.convexes = 64;
    auto m = BspModel<float>::init(cfg, 3);
    Tensor<float> code({256});
    for (size_t i = 0; i < code.numel(); ++i) code[i] = float(i % 7) * 0.1f;
    Tensor<float> planes = predict_planes(m, code);
    CHECK(planes.shape == std::vector<int>{256, 3});
    Tensor<float> again = predict_planes(m, code);
    CHECK(std::memcmp(planes.data.data(), again.data.data(), planes.numel() * 4) == 0);
}

TEST_CASE("predict_planes with zeroed weights returns the output bias everywhere") {
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.planes = 4;
    cfg.convexes = 2;
    auto m = BspModel<double>::init(cfg, 3);
    for (int w : m.mlp_w)
        for (auto& v : m.params[w].data) v = 0.0;
    for (int b : m.mlp_b)
        for (auto& v : m.params[b].data) v = 0.0;
    auto& bias = m.params[m.mlp_b.back()];
    for (size_t i = 0; i < bias.numel(); ++i) bias[i] = double(i) * 0.5;
    Tensor<double> planes = predict_planes(m, Tensor<double>({256}));
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 3; ++j) CHECK(planes.at(k, j) == double(k * 3 + j) * 0.5);
    CHECK_THROWS_AS(predict_planes(m, Tensor<double>({100})), std::invalid_argument);
}

TEST_CASE("signed_distances matches hand substitution") {
    Tensor<double> planes3 = make<double>({1, 4}, {1, 0, 0, -0.25});
    Tensor<double> p3 = make<double>({1, 4}, {0.5, 0, 0, 1});
    CHECK(signed_distances(p3, planes3).at(0, 0) == 0.25);

    // a point on its plane
    Tensor<double> on = make<double>({1, 4}, {0.25, 0.7, -0.3, 1});
    CHECK(signed_distances(on, planes3).at(0, 0) == 0.0);

    Tensor<double> planes2 = make<double>({1, 3}, {0, 1, -0.1});
    Tensor<double> p2 = make<double>({1, 3}, {0.3, 0.3, 1});
    CHECK(signed_distances(p2, planes2).at(0, 0) == doctest::Approx(0.2).epsilon(1e-12));

    Tensor<double> bad = make<double>({1, 3}, {0.3, 0.3, 0.9});
    CHECK_THROWS_WITH_AS(signed_distances(bad, planes2), doctest::Contains("homogeneous"),
                         std::invalid_argument);
}

TEST_CASE("quadric_distances evaluates the unit sphere quadric") {
    Tensor<double> q = make<double>({1, 10}, {1, 1, 1, 0, 0, 0, 0, 0, 0, -1});
    Tensor<double> pts = make<double>({3, 3}, {0, 0, 0, 1, 0, 0, 2, 0, 0});
    Tensor<double> d = quadric_distances(pts, q);
    CHECK(d.at(0, 0) == -1.0);
    CHECK(d.at(1, 0) == 0.0);
    CHECK(d.at(2, 0) == 3.0);
}

TEST_CASE("convex_soft on the square") {
    Tensor<double> t_col = make<double>({4, 1}, {1, 1, 1, 1});
    Tensor<double> pts = make<double>({2, 3}, {0.0, 0.0, 1.0, 0.5, 0.0, 1.0});
    Tensor<double> d = signed_distances(pts, square_planes());
    Tensor<double> c = convex_soft(d, t_col);
    CHECK(c.at(0, 0) == 0.0); // inside every half-space
    CHECK(c.at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));

    // all-zero selection gives the degenerate always-inside column
    Tensor<double> t_zero({4, 1});
    Tensor<double> cz = convex_soft(d, t_zero);
    CHECK(cz.at(0, 0) == 0.0);
    CHECK(cz.at(1, 0) == 0.0);
}

TEST_CASE("convex_hard on the square with degenerate flagging") {
    Tensor<double> t = make<double>({4, 2}, {1, 0, 1, 0, 1, 0, 1, 0});
    Tensor<double> pts = make<double>({3, 3}, {0, 0, 1, 0.5, 0, 1, 0.25, 0.1, 1});
    Tensor<double> d = signed_distances(pts, square_planes());
    std::vector<char> degenerate;
    Tensor<double> c = convex_hard(d, t, &degenerate);
    CHECK(c.at(0, 0) == -0.25);
    CHECK(c.at(1, 0) == 0.25);
    CHECK(c.at(2, 0) == 0.0); // on the x-plane
    CHECK(degenerate == std::vector<char>{0, 1});
}

TEST_CASE("shape_hard takes the min over active convexes and rejects empty") {
    Tensor<double> c = make<double>({1, 3}, {0.3, 0.1, 0.7});
    Tensor<double> s = shape_hard(c, {0, 1, 2});
    CHECK(s[0] == 0.1);
    Tensor<double> s2 = shape_hard(c, {0, 2});
    CHECK(s2[0] == 0.3);
    CHECK_THROWS_WITH_AS(shape_hard(c, {}), doctest::Contains("zero active"),
                         std::invalid_argument);
    Tensor<double> inside = make<double>({1, 2}, {0.0, 0.4});
    CHECK(shape_hard(inside, {0, 1})[0] == 0.0);
}

TEST_CASE("shape_soft reproduces the outside-everywhere-but-inside-composition case") {
    // W = 1, every convex value 0.5, c >= 2 -> S+ = 1
    Tensor<double> c = make<double>({1, 2}, {0.5, 0.5});
    Tensor<double> w = make<double>({2, 1}, {1, 1});
    CHECK(shape_soft(c, w)[0] == 1.0);

    Tensor<double> one = make<double>({1, 1}, {0.0});
    CHECK(shape_soft(one, make<double>({1, 1}, {1}))[0] == 1.0);

    Tensor<double> far = make<double>({1, 2}, {1.0, 3.5});
    CHECK(shape_soft(far, w)[0] == 0.0);
}

TEST_CASE("fc head widths and hand case") {
    ModelConfig cfg;
    cfg.dim = 3;
    cfg.planes = 4096;
    cfg.convexes = 1;
    cfg.variant = Variant::fc;
    cfg.encoder = EncoderKind::latent;
    cfg.latent_count = 1;
    auto m = BspModel<float>::init(cfg, 1);
    CHECK(m.params[m.fc_w[0]].shape == std::vector<int>{4096, 512});
    CHECK(m.params[m.fc_w[1]].shape == std::vector<int>{512, 256});
    CHECK(m.params[m.fc_w[2]].shape == std::vector<int>{256, 1});

    // zero weights everywhere: output is leaky_clip(0) = 0
    for (int w : m.fc_w)
        for (auto& v : m.params[w].data) v = 0.0f;
    for (int b : m.fc_b)
        for (auto& v : m.params[b].data) v = 0.0f;
    Tensor<float> d({3, 4096});
    for (auto& v : d.data) v = 0.7f;
    Tensor<float> out = bspfc_forward(m, d);
    CHECK(out.shape == std::vector<int>{3});
    for (size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("single dense fc layer hand case gives leaky_clip(2) = 1.01") {
    ParamStore<double> ps;
    int w = ps.add("w", make<double>({1, 1}, {2.0}));
    int b = ps.add("b", make<double>({1}, {0.0}));
    Tape<double> t;
    int out = build_fc_head(t, ps, t.constant(make<double>({1, 1}, {1.0})), {w}, {b});
    CHECK(t.val(out)[0] == doctest::Approx(1.01).epsilon(1e-12));
}

TEST_CASE("encode via the latent table returns the trainable row") {
    ModelConfig cfg;
    cfg.dim = 3;
    cfg.planes = 8;
    cfg.convexes = 4;
    cfg.encoder = EncoderKind::latent;
    cfg.latent_count = 10;
    auto m = BspModel<float>::init(cfg, 9);
    Tensor<float> code = encode(m, 7);
    for (int k = 0; k < cfg.code_size; ++k) CHECK(code[size_t(k)] == m.params[m.latent].at(7, k));
    CHECK_THROWS_WITH_AS(encode(m, 10), doctest::Contains("unknown shape id"),
                         std::invalid_argument);
    CHECK_THROWS_AS(encode(m, -1), std::invalid_argument);
}

TEST_CASE("encode via the conv encoder: zero weights give the dense bias") {
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.planes = 8;
    cfg.convexes = 4;
    cfg.image_size = 32;
    cfg.enc_channels = 2;
    auto m = BspModel<float>::init(cfg, 5);
    for (int w : m.enc_w)
        for (auto& v : m.params[w].data) v = 0.0f;
    for (int b : m.enc_b)
        for (auto& v : m.params[b].data) v = 0.0f;
    for (auto& v : m.params[m.enc_dense_w].data) v = 0.0f;
    auto& bias = m.params[m.enc_dense_b];
    for (size_t i = 0; i < bias.numel(); ++i) bias[i] = float(i % 5);
    Tensor<float> img({32, 32, 1});
    for (auto& v : img.data) v = 0.0f;
    Tensor<float> code = encode(m, img);
    for (size_t i = 0; i < code.numel(); ++i) CHECK(code[i] == float(i % 5));

    // determinism on a nonzero image
    auto m2 = BspModel<float>::init(cfg, 6);
    Rng rng(3);
    for (auto& v : img.data) v = rng.unit() < 0.5 ? 0.0f : 1.0f;
    Tensor<float> c1 = encode(m2, img);
    Tensor<float> c2 = encode(m2, img);
    CHECK(std::memcmp(c1.data.data(), c2.data.data(), c1.numel() * 4) == 0);
}

TEST_CASE("linear_plane_map is linear and shapes QS-4096 as 4096x10") {
    ModelConfig cfg;
    cfg.dim = 3;
    cfg.planes = 4096;
    cfg.convexes = 1;
    cfg.variant = Variant::fc_qs;
    cfg.encoder = EncoderKind::latent;
    cfg.latent_count = 1;
    auto m = BspModel<double>::init(cfg, 2);
    Tensor<double> zero({256});
    Tensor<double> q0 = linear_plane_map(m, zero);
    CHECK(q0.shape == std::vector<int>{4096, 10});
    // zero code -> bias only
    const auto& bias = m.params[m.mlp_b[0]];
    for (size_t i = 0; i < 100; ++i) CHECK(q0.data[i] == bias[i]);

    for (auto& v : m.params[m.mlp_b[0]].data) v = 0.0;
    Tensor<double> code({256});
    Rng rng(8);
    for (auto& v : code.data) v = rng.normal();
    Tensor<double> q1 = linear_plane_map(m, code);
    for (auto& v : code.data) v *= 2.0;
    Tensor<double> q2 = linear_plane_map(m, code);
    for (size_t i = 0; i < 200; ++i) CHECK(q2.data[i] == doctest::Approx(2.0 * q1.data[i]));
}

TEST_CASE("sign equivalence of hard and soft convex layers") {
    Rng rng(17);
    int mismatches = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int p = rng.uniform_int(2, 10), c = rng.uniform_int(1, 5), n = rng.uniform_int(1, 20);
        Tensor<double> planes({p, 4});
        for (auto& v : planes.data) v = rng.uniform(-1, 1);
        Tensor<double> t({p, c});
        for (auto& v : t.data) v = rng.unit() < 0.4 ? 1.0 : 0.0;
        // ensure no degenerate columns for the equivalence
        for (int j = 0; j < c; ++j) t.at(rng.uniform_int(0, p - 1), j) = 1.0;
        Tensor<double> pts({n, 4});
        for (int i = 0; i < n; ++i) {
            pts.at(i, 0) = rng.uniform(-0.5, 0.5);
            pts.at(i, 1) = rng.uniform(-0.5, 0.5);
            pts.at(i, 2) = rng.uniform(-0.5, 0.5);
            pts.at(i, 3) = 1.0;
        }
        Tensor<double> d = signed_distances(pts, planes);
        Tensor<double> soft = convex_soft(d, t);
        Tensor<double> hard = convex_hard(d, t);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                bool hard_in = hard.at(i, j) <= 0.0;
                bool soft_in = soft.at(i, j) == 0.0;
                if (hard_in != soft_in) ++mismatches;
                if (soft.at(i, j) < 0.0) ++mismatches; // nonnegativity under nonnegative T
            }
        // shape_hard = 0 iff some convex has soft value 0
        std::vector<int> active(size_t(c), 0);
        for (int j = 0; j < c; ++j) active[size_t(j)] = j;
        Tensor<double> s = shape_hard(soft, active);
        for (int i = 0; i < n; ++i) {
            bool any_zero = false;
            for (int j = 0; j < c; ++j) any_zero = any_zero || soft.at(i, j) == 0.0;
            if ((s[size_t(i)] == 0.0) != any_zero) ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("shape_soft stays in [0,1]") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        int n = rng.uniform_int(1, 10), c = rng.uniform_int(1, 6);
        Tensor<double> conv({n, c});
        for (auto& v : conv.data) v = rng.uniform(-0.5, 3.0);
        Tensor<double> w({c, 1});
        for (auto& v : w.data) v = rng.uniform(-2, 2);
        Tensor<double> s = shape_soft(conv, w);
        for (size_t i = 0; i < s.numel(); ++i) {
            CHECK(s[i] >= 0.0);
            CHECK(s[i] <= 1.0);
        }
    }
}

TEST_CASE("translation equivariance is exact on dyadic inputs") {
    Rng rng(31);
    auto dyadic = [&](double scale) { return double(rng.uniform_int(-64, 64)) / 64.0 * scale; };
    for (int trial = 0; trial < 50; ++trial) {
        int p = 6, c = 3, n = 8;
        Tensor<double> planes({p, 4});
        for (auto& v : planes.data) v = dyadic(1.0);
        Tensor<double> t({p, c});
        for (auto& v : t.data) v = rng.unit() < 0.5 ? 1.0 : 0.0;
        Tensor<double> w({c, 1});
        for (auto& v : w.data) v = dyadic(1.0);
        Tensor<double> pts({n, 4});
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) pts.at(i, k) = dyadic(0.5);
            pts.at(i, 3) = 1.0;
        }
        double tx = dyadic(0.25), ty = dyadic(0.25), tz = dyadic(0.25);

        Tensor<double> moved = pts;
        for (int i = 0; i < n; ++i) {
            moved.at(i, 0) += tx;
            moved.at(i, 1) += ty;
            moved.at(i, 2) += tz;
        }
        Tensor<double> adjusted = planes;
        for (int k = 0; k < p; ++k)
            adjusted.at(k, 3) -=
                planes.at(k, 0) * tx + planes.at(k, 1) * ty + planes.at(k, 2) * tz;

        Tensor<double> d0 = signed_distances(pts, planes);
        Tensor<double> d1 = signed_distances(moved, adjusted);
        for (size_t i = 0; i < d0.numel(); ++i) CHECK(d0[i] == d1[i]);

        Tensor<double> c0 = convex_soft(d0, t);
        Tensor<double> c1 = convex_soft(d1, t);
        for (size_t i = 0; i < c0.numel(); ++i) CHECK(c0[i] == c1[i]);

        Tensor<double> s0 = shape_soft(c0, w);
        Tensor<double> s1 = shape_soft(c1, w);
        for (size_t i = 0; i < s0.numel(); ++i) CHECK(s0[i] == s1[i]);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.planes = 16;
    cfg.convexes = 8;
    cfg.image_size = 32;
    cfg.enc_channels = 2;
    cfg.stage = 2;
    cfg.binary_t = true;
    auto m = BspModel<float>::init(cfg, 77);
    auto& t = m.params[m.selection];
    for (auto& v : t.data) v = v > 0 ? 1.0f : 0.0f;

    std::string p1 = "ck_test_a.bspn", p2 = "ck_test_b.bspn";
    save_checkpoint(m, p1);
    auto loaded = load_checkpoint<float>(p1);
    CHECK(loaded.cfg.stage == 2);
    CHECK(loaded.cfg.binary_t);
    CHECK(loaded.cfg.planes == 16);
    save_checkpoint(loaded, p2);

    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(sa.size() > 0);

    // double-precision load sees the identical float values
    auto dbl = load_checkpoint<double>(p1);
    for (int s = 0; s < m.params.count(); ++s)
        for (size_t i = 0; i < m.params[s].numel(); ++i)
            CHECK(double(m.params[s][i]) == dbl.params[s][i]);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("checkpoint loader rejects corrupted files") {
    std::string path = "ck_test_bad.bspn";
    {
        std::ofstream os(path);
        os << "not a checkpoint\n";
    }
    CHECK_THROWS_AS(load_checkpoint<float>(path), std::runtime_error);
    std::remove(path.c_str());
}
