#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "adanas/tensor.hpp"

namespace adanas {

// Reverse-mode automatic differentiation over dense f64 tensors.
//
// A Tape records one forward computation; backward() walks it once in reverse
// and writes gradients into the Tensors registered via param(). Tapes are
// single-use and confined to one worker. Constants registered via input()
// never receive gradients, which is how frozen subnetworks are kept out of
// every backward pass.
class Tape {
public:
    using ValueId = int32_t;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Trainable leaf. backward() assigns d(loss)/d(t) into t.grad (zeros if the
    // leaf does not reach the loss). Registering the same tensor twice returns
    // the same node, so gradients accumulate naturally.
    ValueId param(Tensor& t);

    // Constant leaf; no gradient ever flows into it.
    ValueId input(const Tensor& t);
    ValueId input(Tensor&& t);

    // --- ops ------------------------------------------------------------
    // x:[B,I] w:[I,O] b:[O] -> [B,O]
    ValueId affine(ValueId x, ValueId w, ValueId b);
    // NHWC. x:[B,H,W,Ci] k:[KH,KW,Ci,Co] b:[Co] -> [B,H,W,Co]; stride 1,
    // zero padding "same", odd kernel dims.
    ValueId conv2d(ValueId x, ValueId k, ValueId b);
    ValueId relu(ValueId x);
    // x:[B,H,W,C] -> [B,C], mean over H and W.
    ValueId global_average_pool(ValueId x);
    // [B,...] -> [B, prod(rest)]
    ValueId flatten(ValueId x);
    ValueId add(ValueId a, ValueId b);          // same-shape elementwise
    ValueId mul(ValueId a, ValueId b);          // same-shape elementwise
    ValueId scalar_scale(ValueId x, double c);  // constant factor
    ValueId scale_by(ValueId x, ValueId s);     // s is a 1-element value
    ValueId softmax(ValueId x);                 // rowwise, [B,C]
    ValueId log_softmax(ValueId x);             // rowwise, [B,C]
    ValueId sum(ValueId x);                     // -> scalar
    // -(1/B) sum_b log_probs[b, labels[b]]
    ValueId nll(ValueId log_probs, std::vector<int> labels);
    // -(1/B) sum_{b,c} target_probs[b,c] * log_probs[b,c]
    ValueId weighted_nll(ValueId log_probs, ValueId target_probs);

    const Tensor& value(ValueId id) const;

    // Reverse pass from a scalar loss. Populates grads of all param() leaves.
    // Throws if the loss is not scalar or the tape was already consumed.
    void backward(ValueId loss);

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        kLeaf,
        kAffine,
        kConv2d,
        kRelu,
        kGap,
        kFlatten,
        kAdd,
        kMul,
        kScalarScale,
        kScaleBy,
        kSoftmax,
        kLogSoftmax,
        kSum,
        kNll,
        kWeightedNll,
    };

    struct Node {
        Op op = Op::kLeaf;
        Tensor out;
        ValueId in[3] = {-1, -1, -1};
        int n_in = 0;
        bool needs_grad = false;
        Tensor* bound = nullptr;   // trainable leaf binding
        double attr = 0.0;         // scalar_scale factor
        std::vector<int> labels;   // nll labels
        std::vector<double> grad;  // allocated during backward
    };

    ValueId push(Node&& n);
    const Node& node(ValueId id) const;
    bool any_needs_grad(ValueId a, ValueId b = -1, ValueId c = -1) const;
    void backprop_node(Node& n);

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, ValueId> param_ids_;
    bool consumed_ = false;
};

} // namespace adanas
