#include "bsp/gradcheck.hpp"

#include <thread>

#include "bsp/fdcheck.hpp"
#include "bsp/losses.hpp"
#include "bsp/model.hpp"

namespace bsp {

namespace {

// Parameter draws for the check spread every activation input over unit
// scale, so kink-margin rejection stays rare. Training-time inits would
// concentrate plane offsets and convex values right on the clip kinks.
void randomize_for_check(BspModel<double>& m, Rng& rng) {
    for (int slot = 0; slot < m.params.count(); ++slot) {
        auto& e = m.params.entries[size_t(slot)];
        double sigma;
        if (slot == m.selection) sigma = 0.6;
        else if (slot == m.aggregation) sigma = 0.8;
        else if (!m.mlp_w.empty() && slot == m.mlp_w.back()) sigma = 8.0 / std::sqrt(double(e.value.dim(0)));
        else if (!m.mlp_b.empty() && slot == m.mlp_b.back()) sigma = 0.3;
        else if (e.value.rank() >= 2) sigma = 1.0 / std::sqrt(double(e.value.numel() / size_t(e.value.shape.back())));
        else sigma = 0.05;
        for (auto& v : e.value.data) v = rng.normal() * sigma;
    }
}

GradcheckResult run_configs(int first, int last, double eps, uint64_t seed,
                            int entries_per_tensor) {
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.planes = 16;
    cfg.convexes = 8;
    cfg.image_size = 32;
    cfg.enc_channels = 2;
    const int npoints = 32;

    GradcheckResult result;
    for (int c = first; c < last; ++c) {
        BspModel<double> model = BspModel<double>::init(cfg, seed);
        Rng rng(substream(seed, 0x60adull + uint64_t(c)));
        FdReport report;
        for (int attempt = 0; attempt < 400; ++attempt) {
            randomize_for_check(model, rng);
            Tensor<double> image({cfg.image_size, cfg.image_size, 1});
            for (auto& v : image.data) v = rng.unit() < 0.5 ? 0.0 : 1.0;
            Tensor<double> points({npoints, 3});
            for (int i = 0; i < npoints; ++i) {
                points.at(i, 0) = rng.uniform(-0.5, 0.5);
                points.at(i, 1) = rng.uniform(-0.5, 0.5);
                points.at(i, 2) = 1.0;
            }
            Tensor<double> occ({npoints});
            for (auto& v : occ.data) v = rng.unit() < 0.5 ? 0.0 : 1.0;

            auto build = [&](Tape<double>& t, const ParamStore<double>&) {
                int code = build_encoder(t, model, t.constant(image));
                int planes = build_planes(t, model, code);
                int d = build_distances(t, t.constant(points), planes);
                int cv = build_convex_soft(t, d, t.param(model.params, model.selection));
                int sp = build_shape_soft(t, cv, t.param(model.params, model.aggregation));
                return build_loss_stage1(t, sp, t.constant(occ), t.param(model.params, model.selection),
                                         t.param(model.params, model.aggregation))
                    .total;
            };
            Rng pick_rng(substream(seed, 0x91c4ull + uint64_t(c)));
            if (fd_check_once(model.params, build, eps, entries_per_tensor, pick_rng, report)) break;
        }
        result.max_rel_err = std::max(result.max_rel_err, report.max_rel_err);
        result.configs += report.configs;
        result.rejected += report.rejected;
        result.checked += report.checked;
    }
    return result;
}

} // namespace

GradcheckResult gradcheck_stage1(int configs, double eps, uint64_t seed, int entries_per_tensor,
                                 int threads) {
    threads = std::max(1, std::min(threads, configs));
    std::vector<GradcheckResult> partial(size_t(threads), GradcheckResult{});
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        int first = configs * t / threads;
        int last = configs * (t + 1) / threads;
        pool.emplace_back([&partial, t, first, last, eps, seed, entries_per_tensor]() {
            partial[size_t(t)] = run_configs(first, last, eps, seed, entries_per_tensor);
        });
    }
    for (auto& th : pool) th.join();
    GradcheckResult result;
    for (const auto& p : partial) {
        result.max_rel_err = std::max(result.max_rel_err, p.max_rel_err);
        result.configs += p.configs;
        result.rejected += p.rejected;
        result.checked += p.checked;
    }
    return result;
}

} // namespace bsp
