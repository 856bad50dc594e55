#include "adanas/optim.hpp"

#include <cmath>
#include <string>

#include "adanas/errors.hpp"

namespace adanas {

double cosine_lr(int64_t step, int64_t total_steps, double base_lr) {
    if (total_steps <= 0) throw ConfigError("cosine_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) {
        throw ConfigError("cosine_lr: step " + std::to_string(step) + " outside [0," +
                          std::to_string(total_steps) + "]");
    }
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.141592653589793238462643 * frac));
}

ClipResult clip_global_norm(ParameterVector& params, double clip_norm) {
    ClipResult r;
    double sq = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        for (double g : params.tensor(i).grad) sq += g * g;
    }
    r.pre_norm = std::sqrt(sq);
    if (r.pre_norm > clip_norm && r.pre_norm > 0.0) {
        const double scale = clip_norm / r.pre_norm;
        double sq2 = 0.0;
        for (size_t i = 0; i < params.size(); ++i) {
            for (double& g : params.tensor(i).grad) {
                g *= scale;
                sq2 += g * g;
            }
        }
        r.post_norm = std::sqrt(sq2);
        r.clipped = true;
    } else {
        r.post_norm = r.pre_norm;
    }
    return r;
}

OptimizerState OptimizerState::create(const ParameterVector& params, int64_t total_steps,
                                      double base_lr, double momentum, double clip_norm) {
    if (total_steps <= 0) throw ConfigError("optimizer: total_steps must be positive");
    if (base_lr <= 0.0) throw ConfigError("optimizer: base_lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum must be in [0,1)");
    if (clip_norm <= 0.0) throw ConfigError("optimizer: clip_norm must be positive");
    OptimizerState s;
    s.total_steps = total_steps;
    s.base_lr = base_lr;
    s.momentum = momentum;
    s.clip_norm = clip_norm;
    s.velocity.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        s.velocity.push_back(Tensor::zeros(params.tensor(i).shape));
    }
    return s;
}

void sgd_momentum_apply(ParameterVector& params, OptimizerState& state, double lr) {
    if (state.velocity.size() != params.size()) {
        throw ShapeError("optimizer: velocity count " + std::to_string(state.velocity.size()) +
                         " does not match parameter count " + std::to_string(params.size()));
    }
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.tensor(i);
        Tensor& v = state.velocity[i];
        if (v.shape != p.shape) {
            throw ShapeError("optimizer: velocity shape " + shape_str(v.shape) +
                             " does not match parameter shape " + shape_str(p.shape));
        }
        if (p.grad.empty()) {
            // Zero grad: velocity still decays.
            for (double& vv : v.data) vv *= state.momentum;
        } else {
            for (size_t j = 0; j < v.data.size(); ++j) {
                v.data[j] = state.momentum * v.data[j] + p.grad[j];
            }
        }
        for (size_t j = 0; j < v.data.size(); ++j) p.data[j] -= lr * v.data[j];
        ensure_finite(p.data, "sgd_momentum step (parameters)");
    }
}

double sgd_momentum_step(ParameterVector& params, OptimizerState& state, ClipResult* clip_out) {
    if (state.step >= state.total_steps) {
        throw ConfigError("optimizer: step " + std::to_string(state.step) +
                          " exceeds total_steps " + std::to_string(state.total_steps));
    }
    ClipResult cr = clip_global_norm(params, state.clip_norm);
    if (clip_out) *clip_out = cr;
    const double lr = cosine_lr(state.step, state.total_steps, state.base_lr);
    sgd_momentum_apply(params, state, lr);
    state.step += 1;
    return lr;
}

} // namespace adanas
