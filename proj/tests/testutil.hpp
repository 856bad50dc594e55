#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "adanas/rng.hpp"
#include "adanas/tape.hpp"
#include "adanas/tensor.hpp"

namespace adanas::test {

inline Tensor random_tensor(std::vector<int> shape, SplitRng& rng, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Graph builder: registers every tensor in `leaves` however it likes and
// returns a scalar loss node.
using GraphFn = std::function<Tape::ValueId(Tape&, std::vector<Tensor>&)>;

// Central-finite-difference check of d(loss)/d(leaf) for every element of
// every leaf against the tape's backward pass. Returns the worst relative
// error, where relative means |fd - grad| / max(1, |fd|, |grad|).
inline double max_gradient_error(std::vector<Tensor>& leaves, const GraphFn& build,
                                 double h = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        const Tape::ValueId loss = build(tape, leaves);
        tape.backward(loss);
        for (const Tensor& t : leaves) analytic.push_back(t.grad);
    }
    auto eval = [&]() {
        Tape tape;
        return tape.value(build(tape, leaves)).data[0];
    };
    double worst = 0.0;
    for (size_t i = 0; i < leaves.size(); ++i) {
        for (size_t j = 0; j < leaves[i].data.size(); ++j) {
            double& x = leaves[i].data[j];
            const double saved = x;
            x = saved + h;
            const double up = eval();
            x = saved - h;
            const double down = eval();
            x = saved;
            const double fd = (up - down) / (2.0 * h);
            const double g = analytic[i][j];
            const double err = std::fabs(fd - g) / std::max({1.0, std::fabs(fd), std::fabs(g)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace adanas::test
