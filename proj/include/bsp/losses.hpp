#pragma once

#include "bsp/tape.hpp"

namespace bsp {

struct Stage1LossReport {
    double rec = 0, t_range = 0, w_unit = 0, total = 0;
};

struct Stage2LossReport {
    double recon = 0, overlap = 0, soft_t = 0, total = 0;
};

struct Stage1Nodes {
    int rec, t_range, w_unit, total;
};

struct Stage2Nodes {
    int recon, overlap, soft_t, total;
};

// L+_rec = E[(S+ - F)^2], L+_T = sum max(-t,0) + max(t-1,0), L+_W = sum |W - 1|
template <typename S>
Stage1Nodes build_loss_stage1(Tape<S>& t, int splus, int occupancy, int selection, int aggregation) {
    int diff = t.sub(splus, occupancy);
    int rec = t.mean_all(t.mul(diff, diff));
    int below = t.sum_all(t.act(t.affine(selection, S(-1), S(0)), Act::relu));
    int above = t.sum_all(t.act(t.affine(selection, S(1), S(-1)), Act::relu));
    int t_range = t.add(below, above);
    int w_unit = t.sum_all(t.abs_val(t.affine(aggregation, S(1), S(-1))));
    int total = t.add(t.add(rec, t_range), w_unit);
    return {rec, t_range, w_unit, total};
}

template <typename S>
Stage1LossReport loss_stage1(const Tensor<S>& splus, const Tensor<S>& occupancy,
                             const Tensor<S>& selection, const Tensor<S>& aggregation) {
    for (S f : occupancy.data)
        if (f != S(0) && f != S(1))
            throw std::invalid_argument("loss_stage1: occupancy must be binary");
    Tape<S> t;
    auto n = build_loss_stage1(t, t.constant(splus), t.constant(occupancy),
                               t.constant(selection), t.constant(aggregation));
    return {double(t.val(n.rec)[0]), double(t.val(n.t_range)[0]), double(t.val(n.w_unit)[0]),
            double(t.val(n.total)[0])};
}

// t = (t > lambda) ? 1 : 0, entrywise; the input is left untouched.
template <typename S>
Tensor<S> quantize_selection(const Tensor<S>& selection, double lambda) {
    Tensor<S> out(selection.shape);
    for (size_t i = 0; i < selection.numel(); ++i)
        out[i] = double(selection[i]) > lambda ? S(1) : S(0);
    return out;
}

// Mask of points sitting in more than one convex. A point counts as inside
// convex j when C+ < tolerance; the exact-zero test would starve the overlap
// loss of gradients because relu saturates strictly inside a convex.
template <typename S>
Tensor<S> overlap_mask(const Tensor<S>& convex, double tolerance = 0.01) {
    int n = convex.dim(0), c = convex.dim(1);
    Tensor<S> mask({n, c});
    for (int i = 0; i < n; ++i) {
        int inside = 0;
        for (int j = 0; j < c; ++j)
            if (double(convex.at(i, j)) < tolerance) ++inside;
        if (inside < 2) continue;
        for (int j = 0; j < c; ++j)
            if (double(convex.at(i, j)) < tolerance) mask.at(i, j) = S(1);
    }
    return mask;
}

// L*_recon = E[F * max(S*,0)] + E[(1-F) * (1 - min(S*,1))]
template <typename S>
int build_loss_stage2_recon(Tape<S>& t, int sstar, int occupancy, int one_minus_occ) {
    int inside = t.mean_all(t.mul(occupancy, t.act(sstar, Act::relu)));
    int outside = t.mean_all(t.mul(one_minus_occ, t.act(t.affine(sstar, S(-1), S(1)), Act::relu)));
    return t.add(inside, outside);
}

template <typename S>
double loss_stage2_recon(const Tensor<S>& sstar, const Tensor<S>& occupancy) {
    for (S f : occupancy.data)
        if (f != S(0) && f != S(1))
            throw std::invalid_argument("loss_stage2_recon: occupancy must be binary");
    Tape<S> t;
    Tensor<S> inv(occupancy.shape);
    for (size_t i = 0; i < occupancy.numel(); ++i) inv[i] = S(1) - occupancy[i];
    int node = build_loss_stage2_recon(t, t.constant(sstar), t.constant(occupancy),
                                       t.constant(std::move(inv)));
    return double(t.val(node)[0]);
}

// L*_overlap = -E_x E_j [ M(x,j) C+_j(x) ]; M is a constant w.r.t. gradients.
template <typename S>
int build_loss_overlap(Tape<S>& t, int convex, int mask) {
    return t.affine(t.mean_all(t.mul(convex, mask)), S(-1), S(0));
}

template <typename S>
double loss_overlap(const Tensor<S>& convex, const Tensor<S>& mask) {
    Tape<S> t;
    return double(t.val(build_loss_overlap(t, t.constant(convex), t.constant(mask)))[0]);
}

// Ablation-only soft thresholding: sum of |t| below lambda and |t-1| above.
// The indicator split is constant per evaluation.
template <typename S>
int build_loss_soft_threshold(Tape<S>& t, int selection, double lambda) {
    const Tensor<S>& tv = t.val(selection);
    Tensor<S> le(tv.shape), gt(tv.shape);
    for (size_t i = 0; i < tv.numel(); ++i) {
        bool below = double(tv[i]) <= lambda;
        le[i] = below ? S(1) : S(0);
        gt[i] = below ? S(0) : S(1);
    }
    int low = t.sum_all(t.mul(t.abs_val(selection), t.constant(std::move(le))));
    int high = t.sum_all(t.mul(t.abs_val(t.affine(selection, S(1), S(-1))), t.constant(std::move(gt))));
    return t.add(low, high);
}

template <typename S>
double loss_soft_threshold(const Tensor<S>& selection, double lambda) {
    Tape<S> t;
    return double(t.val(build_loss_soft_threshold(t, t.constant(selection), lambda))[0]);
}

} // namespace bsp
