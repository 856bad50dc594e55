#pragma once

#include <cstdint>

#include "adanas/params.hpp"

namespace adanas {

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)); monotone non-increasing,
// equal to base_lr at step 0 and 0 at step == total_steps.
double cosine_lr(int64_t step, int64_t total_steps, double base_lr);

struct ClipResult {
    double pre_norm = 0.0;   // global L2 norm before clipping
    double post_norm = 0.0;  // global L2 norm after clipping (recomputed)
    bool clipped = false;
};

// Global-norm clipping: if the L2 norm over all grads exceeds clip_norm,
// every grad is scaled by clip_norm / norm. Zero norm is a no-op.
ClipResult clip_global_norm(ParameterVector& params, double clip_norm);

// Momentum-SGD state for one parameter vector. Velocities mirror parameter
// shapes; `step` counts updates already applied.
struct OptimizerState {
    std::vector<Tensor> velocity;
    int64_t step = 0;
    int64_t total_steps = 0;
    double base_lr = 0.025;
    double momentum = 0.9;
    double clip_norm = 5.0;

    static OptimizerState create(const ParameterVector& params, int64_t total_steps,
                                 double base_lr, double momentum, double clip_norm);
};

// Classic momentum at an explicit learning rate:
//   v <- momentum * v + grad;  param <- param - lr * v
// Missing grads are treated as zero. Does not advance state.step.
void sgd_momentum_apply(ParameterVector& params, OptimizerState& state, double lr);

// Schedule-aware step: clips grads at state.clip_norm, applies the update at
// cosine_lr(state.step, ...), then increments state.step. Returns the lr used.
double sgd_momentum_step(ParameterVector& params, OptimizerState& state,
                         ClipResult* clip_out = nullptr);

} // namespace adanas
