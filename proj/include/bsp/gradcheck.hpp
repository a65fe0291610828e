#pragma once

#include <cstdint>

namespace bsp {

struct GradcheckResult {
    double max_rel_err = 0.0;
    int configs = 0;
    int rejected = 0;
    long checked = 0;
};

// Central-difference validation of the full stage-1 loss graph (conv encoder,
// plane predictor, soft convex/shape layers, all three loss terms) in double
// precision on a small model. Configurations whose activations sit within
// 10*eps of a kink are rejected and resampled.
GradcheckResult gradcheck_stage1(int configs, double eps = 1e-6, uint64_t seed = 11,
                                 int entries_per_tensor = 6, int threads = 2);

} // namespace bsp
