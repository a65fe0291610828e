#pragma once

#include "bsp/dataset.hpp"
#include "bsp/losses.hpp"
#include "bsp/model.hpp"
#include "bsp/optimizer.hpp"

namespace bsp {

// Raised when training loss goes non-finite; the trainer saves the last
// finite snapshot before throwing.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResolutionStage {
    int resolution;
    int epochs;
    int batch_size;
};

struct TrainConfig {
    double lambda = 0.01;
    bool use_overlap = false;
    bool use_soft_t = false;
    double overlap_tolerance = 0.01;
    std::vector<ResolutionStage> stage1 = {{64, 100, 16}};
    int stage2_epochs = 50;
    double step_size = 1e-4;
    uint64_t seed = 0;
    int threads = 2;
    bool log_wall_time = true;
    std::string live_log; // when set, loss rows are appended here as epochs finish

    void validate() const {
        if (lambda <= 0.0 || lambda >= 1.0)
            throw std::invalid_argument("train config: lambda must be in (0,1)");
        if (stage1.empty()) throw std::invalid_argument("train config: resolutions must be nonempty");
        for (size_t i = 1; i < stage1.size(); ++i)
            if (stage1[i].resolution <= stage1[i - 1].resolution)
                throw std::invalid_argument("train config: resolutions must be strictly increasing");
    }
};

struct EpochLog {
    int epoch;
    int stage;
    int resolution;
    Stage1LossReport s1;
    Stage2LossReport s2;
    double total;
    double wall_seconds;
};

struct TrainShapeData {
    int id = 0;
    Tensor<float> image; // empty unless conv-encoder mode
    int latent_row = -1;
    std::map<int, ShapeSample> samples;
};

struct TrainSet {
    int dim = 2;
    std::vector<TrainShapeData> shapes;
};

struct TrainResult {
    BspModel<float> model;        // final (stage 2 for the original variant)
    BspModel<float> stage1_model; // snapshot before quantization
    std::vector<EpochLog> log;
    long rejected_steps = 0;
    bool diverged = false; // when set, model holds the last finite state
};

TrainSet trainset_from_2d(const std::vector<Shape2D>& shapes);
TrainSet trainset_from_3d(const std::vector<Shape3D>& shapes, const std::vector<int>& resolutions,
                          uint64_t seed);

// Stage 1 on S+, quantize T at lambda, stage 2 on S*. The fc variants train
// in a single continuous phase on the reconstruction loss. A warm-start model
// replaces the fresh initialization (e.g. to rerun stage 2 from a shared
// stage-1 state with zero stage-1 epochs).
TrainResult train_two_stage(const TrainSet& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const BspModel<float>* warm_start = nullptr);

void write_loss_csv(const std::vector<EpochLog>& log, const std::string& path, bool wall_time);

// ---- shared evaluation helpers ---------------------------------------------

template <typename S>
Tensor<S> select_columns(const Tensor<S>& m, const std::vector<int>& cols) {
    Tensor<S> out({m.dim(0), int(cols.size())});
    for (int i = 0; i < m.dim(0); ++i)
        for (size_t j = 0; j < cols.size(); ++j) out.at(i, int(j)) = m.at(i, cols[j]);
    return out;
}

template <typename S>
Tensor<S> model_code(const BspModel<S>& m, const TrainShapeData& shape) {
    if (m.cfg.encoder == EncoderKind::conv2d) return encode(m, shape.image.template cast<S>());
    return encode(m, shape.latent_row);
}

// S+ and S* over a point set for one shape; quantizes T when the model still
// carries a continuous selection.
template <typename S>
struct FieldEval {
    Tensor<S> planes;
    Tensor<S> t_binary;
    std::vector<int> active;
    Tensor<S> splus;
    Tensor<S> sstar; // empty when no convex survives quantization
};

template <typename S>
FieldEval<S> eval_fields(const BspModel<S>& m, const Tensor<S>& code, const Tensor<S>& points,
                         double lambda) {
    FieldEval<S> out;
    out.planes = predict_planes(m, code);
    Tensor<S> d = signed_distances(points, out.planes);
    const Tensor<S>& t = m.params[m.selection];
    Tensor<S> c = convex_soft(d, t);
    out.splus = shape_soft(c, m.params[m.aggregation]);
    out.t_binary = m.cfg.binary_t ? t : quantize_selection(t, lambda);
    out.active = active_columns(out.t_binary);
    if (!out.active.empty()) {
        Tensor<S> cb = convex_soft(d, select_columns(out.t_binary, out.active));
        std::vector<int> all(out.active.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = int(i);
        out.sstar = shape_hard(cb, all);
    }
    return out;
}

// Fraction of grid cells whose thresholded field agrees with the raster.
// S* marks inside as exactly zero; S+ thresholds at 0.5.
inline double agreement(const Tensor<float>& field, const std::vector<double>& occupancy,
                        bool hard) {
    size_t match = 0;
    for (size_t i = 0; i < occupancy.size(); ++i) {
        bool inside = hard ? field[i] <= 0.0f : field[i] > 0.5f;
        if (inside == (occupancy[i] > 0.5)) ++match;
    }
    return double(match) / double(occupancy.size());
}

} // namespace bsp
