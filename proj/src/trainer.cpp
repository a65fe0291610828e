#include "bsp/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

namespace bsp {

static std::string loss_csv_row(const EpochLog& e, bool wall_time);
static const char* kLossCsvHeader =
    "epoch,stage,resolution,rec,t_range,w_unit,recon,overlap,soft_t,total,wall_seconds\n";

namespace {

struct ShapeCache {
    Tensor<float> points;    // n x (d+1)
    Tensor<float> occupancy; // n
    Tensor<float> inv_occ;   // n
};

ShapeCache make_cache(const ShapeSample& s) {
    ShapeCache c;
    c.points = s.points.cast<float>();
    int n = int(s.occupancy.size());
    c.occupancy = Tensor<float>({n});
    c.inv_occ = Tensor<float>({n});
    for (int i = 0; i < n; ++i) {
        c.occupancy[size_t(i)] = float(s.occupancy[size_t(i)]);
        c.inv_occ[size_t(i)] = 1.0f - float(s.occupancy[size_t(i)]);
    }
    return c;
}

struct BatchAccum {
    GradBuffer<float> grads;
    double rec = 0, t_range = 0, w_unit = 0, recon = 0, overlap = 0, soft_t = 0, total = 0;
    int count = 0;

    explicit BatchAccum(const ParamStore<float>& ps) : grads(ps) {}
    void reset() {
        grads.zero();
        rec = t_range = w_unit = recon = overlap = soft_t = total = 0;
        count = 0;
    }
    void merge(const BatchAccum& o) {
        grads.add(o.grads);
        rec += o.rec;
        t_range += o.t_range;
        w_unit += o.w_unit;
        recon += o.recon;
        overlap += o.overlap;
        soft_t += o.soft_t;
        total += o.total;
        count += o.count;
    }
};

int build_code_node(Tape<float>& t, const BspModel<float>& m, const TrainShapeData& shape,
                    const ShapeCache&) {
    if (m.cfg.encoder == EncoderKind::conv2d) return build_encoder(t, m, t.constant(shape.image));
    return build_latent_code(t, m, shape.latent_row);
}

// Stage-1 graph for one shape; returns the scalar total node and fills terms.
void run_stage1_shape(const BspModel<float>& m, const TrainShapeData& shape, const ShapeCache& cache,
                      BatchAccum& acc) {
    Tape<float> t;
    int code = build_code_node(t, m, shape, cache);
    int planes = build_planes(t, m, code);
    int points = t.constant(cache.points);
    int occ = t.constant(cache.occupancy);
    int splus, total;
    Stage1Nodes nodes{};
    if (m.cfg.variant == Variant::original) {
        int d = build_distances(t, points, planes);
        int c = build_convex_soft(t, d, t.param(m.params, m.selection));
        splus = build_shape_soft(t, c, t.param(m.params, m.aggregation));
        nodes = build_loss_stage1(t, splus, occ, t.param(m.params, m.selection),
                                  t.param(m.params, m.aggregation));
        total = nodes.total;
    } else {
        int d;
        if (m.cfg.is_qs()) {
            Tensor<float> raw({cache.points.dim(0), m.cfg.dim});
            for (int i = 0; i < raw.dim(0); ++i)
                for (int k = 0; k < m.cfg.dim; ++k) raw.at(i, k) = cache.points.at(i, k);
            d = t.matmul(t.constant(quadric_basis(raw)), planes, true);
        } else {
            d = build_distances(t, points, planes);
        }
        int out = build_fc_head(t, m.params, d, m.fc_w, m.fc_b);
        int diff = t.sub(out, occ);
        total = t.mean_all(t.mul(diff, diff));
        nodes.rec = total;
    }
    t.backward(total);
    t.accumulate_param_grads(acc.grads);
    acc.rec += double(t.val(nodes.rec)[0]);
    if (m.cfg.variant == Variant::original) {
        acc.t_range += double(t.val(nodes.t_range)[0]);
        acc.w_unit += double(t.val(nodes.w_unit)[0]);
    }
    acc.total += double(t.val(total)[0]);
    acc.count += 1;
}

// Stage-2 graph: C+ over the active binary selection (or the live continuous
// T in the soft-threshold ablation), min-pooled into S*.
void run_stage2_shape(const BspModel<float>& m, const TrainShapeData& shape, const ShapeCache& cache,
                      const Tensor<float>& t_active, const TrainConfig& tcfg, BatchAccum& acc) {
    Tape<float> t;
    int code = build_code_node(t, m, shape, cache);
    int planes = build_planes(t, m, code);
    int d = build_distances(t, t.constant(cache.points), planes);
    int relu_d = t.act(d, Act::relu);
    int c = tcfg.use_soft_t ? t.matmul(relu_d, t.param(m.params, m.selection))
                            : t.matmul(relu_d, t.constant(t_active));
    int sstar = t.reduce_extremum(c, Extremum::min, 1);
    int occ = t.constant(cache.occupancy);
    int inv = t.constant(cache.inv_occ);
    int recon = build_loss_stage2_recon(t, sstar, occ, inv);
    int total = recon;
    int overlap = -1, soft = -1;
    if (tcfg.use_overlap) {
        overlap = build_loss_overlap(t, c, t.constant(overlap_mask(t.val(c), tcfg.overlap_tolerance)));
        total = t.add(total, overlap);
    }
    if (tcfg.use_soft_t) {
        soft = build_loss_soft_threshold(t, t.param(m.params, m.selection), tcfg.lambda);
        total = t.add(total, soft);
    }
    t.backward(total);
    t.accumulate_param_grads(acc.grads);
    acc.recon += double(t.val(recon)[0]);
    if (overlap >= 0) acc.overlap += double(t.val(overlap)[0]);
    if (soft >= 0) acc.soft_t += double(t.val(soft)[0]);
    acc.total += double(t.val(total)[0]);
    acc.count += 1;
}

} // namespace

TrainSet trainset_from_2d(const std::vector<Shape2D>& shapes) {
    TrainSet set;
    set.dim = 2;
    set.shapes.reserve(shapes.size());
    for (const auto& s : shapes) {
        TrainShapeData d;
        d.id = s.id;
        d.image = Tensor<float>({Shape2D::res, Shape2D::res, 1});
        for (size_t i = 0; i < s.image.size(); ++i) d.image.data[i] = float(s.image[i]);
        d.samples[Shape2D::res] = sample_2d(s);
        set.shapes.push_back(std::move(d));
    }
    return set;
}

TrainSet trainset_from_3d(const std::vector<Shape3D>& shapes, const std::vector<int>& resolutions,
                          uint64_t seed) {
    TrainSet set;
    set.dim = 3;
    set.shapes.reserve(shapes.size());
    int row = 0;
    for (const auto& s : shapes) {
        TrainShapeData d;
        d.id = s.id;
        d.latent_row = row++;
        for (int r : resolutions) d.samples[r] = sample_3d(s, r, seed);
        set.shapes.push_back(std::move(d));
    }
    return set;
}

TrainResult train_two_stage(const TrainSet& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const BspModel<float>* warm_start) {
    tcfg.validate();
    if (data.shapes.empty()) throw std::invalid_argument("train: dataset is empty");
    if (mcfg.encoder == EncoderKind::latent && mcfg.latent_count != int(data.shapes.size()))
        throw std::invalid_argument("train: latent_count must equal the shape count");

    TrainResult result{warm_start ? *warm_start : BspModel<float>::init(mcfg, tcfg.seed),
                       BspModel<float>(), {}, 0, false};
    BspModel<float>& model = result.model;
    model.cfg.stage = 1;
    model.cfg.binary_t = false;

    // per-(shape, resolution) sample cache
    std::map<std::pair<int, int>, ShapeCache> cache;
    auto cached = [&](int shape_idx, int res) -> const ShapeCache& {
        auto key = std::make_pair(shape_idx, res);
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, make_cache(data.shapes[size_t(shape_idx)].samples.at(res))).first;
        return it->second;
    };

    ParamStore<float> snapshot = model.params;
    int epoch_counter = 0;
    if (!tcfg.live_log.empty()) {
        std::ofstream os(tcfg.live_log);
        if (!os) throw std::invalid_argument("train: cannot open live log " + tcfg.live_log);
        os << kLossCsvHeader;
    }

    auto run_phase = [&](int stage, int resolution, int epochs, int batch_size,
                         const Tensor<float>& t_active, Adam<float>& opt) {
        int threads = std::max(1, tcfg.threads);
        std::vector<BatchAccum> shard_accum;
        for (int k = 0; k < threads; ++k) shard_accum.emplace_back(model.params);
        BatchAccum epoch_accum(model.params);

        std::vector<int> order(data.shapes.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
        for (int i = 0; i < int(data.shapes.size()); ++i) cached(i, resolution);

        for (int e = 0; e < epochs; ++e) {
            auto t0 = std::chrono::steady_clock::now();
            Rng shuffle_rng(substream(tcfg.seed, 0xe90c5ull + uint64_t(epoch_counter)));
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[size_t(shuffle_rng.next_u64() % uint64_t(i))]);

            epoch_accum.reset();
            for (size_t b0 = 0; b0 < order.size(); b0 += size_t(batch_size)) {
                size_t b1 = std::min(order.size(), b0 + size_t(batch_size));
                int nb = int(b1 - b0);
                int k = std::min(threads, nb);
                for (int s = 0; s < k; ++s) shard_accum[size_t(s)].reset();
                auto work = [&](int s) {
                    size_t lo = b0 + size_t(s) * size_t(nb) / size_t(k);
                    size_t hi = b0 + size_t(s + 1) * size_t(nb) / size_t(k);
                    for (size_t i = lo; i < hi; ++i) {
                        int idx = order[i];
                        const auto& sc = cached(idx, resolution);
                        if (stage == 1)
                            run_stage1_shape(model, data.shapes[size_t(idx)], sc, shard_accum[size_t(s)]);
                        else
                            run_stage2_shape(model, data.shapes[size_t(idx)], sc, t_active, tcfg,
                                             shard_accum[size_t(s)]);
                    }
                };
                if (k == 1) {
                    work(0);
                } else {
                    std::vector<std::thread> pool;
                    for (int s = 0; s < k; ++s) pool.emplace_back(work, s);
                    for (auto& th : pool) th.join();
                }
                BatchAccum& total = shard_accum[0];
                for (int s = 1; s < k; ++s) total.merge(shard_accum[size_t(s)]);
                if (!std::isfinite(total.total))
                    throw NumericalError("training diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch_counter));
                total.grads.scale(1.0f / float(nb));
                if (!opt.step(model.params, total.grads)) ++result.rejected_steps;
                epoch_accum.rec += total.rec;
                epoch_accum.t_range += total.t_range;
                epoch_accum.w_unit += total.w_unit;
                epoch_accum.recon += total.recon;
                epoch_accum.overlap += total.overlap;
                epoch_accum.soft_t += total.soft_t;
                epoch_accum.total += total.total;
                epoch_accum.count += total.count;
            }

            double n = double(std::max(1, epoch_accum.count));
            EpochLog log{};
            log.epoch = epoch_counter;
            log.stage = stage;
            log.resolution = resolution;
            log.s1 = {epoch_accum.rec / n, epoch_accum.t_range / n, epoch_accum.w_unit / n,
                      (epoch_accum.rec + epoch_accum.t_range + epoch_accum.w_unit) / n};
            log.s2 = {epoch_accum.recon / n, epoch_accum.overlap / n, epoch_accum.soft_t / n,
                      (epoch_accum.recon + epoch_accum.overlap + epoch_accum.soft_t) / n};
            log.total = epoch_accum.total / n;
            log.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.log.push_back(log);
            if (!tcfg.live_log.empty()) {
                std::ofstream os(tcfg.live_log, std::ios::app);
                os << loss_csv_row(log, tcfg.log_wall_time);
            }
            snapshot = model.params;
            ++epoch_counter;
        }
    };

    try {
        // stage 1 (continuous); the fc variants train only this phase
        Adam<float> opt1(model.params, tcfg.step_size);
        Tensor<float> unused;
        for (const auto& st : tcfg.stage1)
            run_phase(1, st.resolution, st.epochs, st.batch_size, unused, opt1);

        if (mcfg.variant == Variant::original) {
            result.stage1_model = model;
            result.stage1_model.cfg.stage = 1;
            result.stage1_model.cfg.binary_t = false;

            Tensor<float> t_bin = quantize_selection(model.params[model.selection], tcfg.lambda);
            std::vector<int> active = active_columns(t_bin);
            Tensor<float> t_active = select_columns(t_bin, active);
            if (!tcfg.use_soft_t) model.params[model.selection] = t_bin;

            // an empty quantized tree has no S*; the model stays valid but
            // there is nothing for stage 2 to optimize
            if (!active.empty() || tcfg.use_soft_t) {
                const auto& last = tcfg.stage1.back();
                Adam<float> opt2(model.params, tcfg.step_size);
                run_phase(2, last.resolution, tcfg.stage2_epochs, last.batch_size, t_active, opt2);
            }
            model.cfg.stage = 2;
            model.cfg.binary_t = !tcfg.use_soft_t;
        }
    } catch (const NumericalError&) {
        model.params = snapshot; // last finite state
        result.diverged = true;
    }
    return result;
}

static std::string loss_csv_row(const EpochLog& e, bool wall_time) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n",
                  e.epoch, e.stage, e.resolution, e.s1.rec, e.s1.t_range, e.s1.w_unit,
                  e.s2.recon, e.s2.overlap, e.s2.soft_t, e.total,
                  wall_time ? e.wall_seconds : 0.0);
    return buf;
}

void write_loss_csv(const std::vector<EpochLog>& log, const std::string& path, bool wall_time) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_loss_csv: cannot open " + path);
    os << kLossCsvHeader;
    for (const auto& e : log) os << loss_csv_row(e, wall_time);
}

} // namespace bsp
