#include "adanas/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adanas/errors.hpp"

namespace adanas {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape) + " and " +
                     shape_str(b.shape));
}

[[noreturn]] void rank_fail(const char* op, const Tensor& t, const char* expect) {
    throw ShapeError(std::string(op) + ": expected " + expect + ", got shape " +
                     shape_str(t.shape));
}

} // namespace

Tape::ValueId Tape::push(Node&& n) {
    ensure_finite(n.out.data, "tape op");
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(ValueId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
        throw Error("tape: value id " + std::to_string(id) + " out of range");
    }
    return nodes_[static_cast<size_t>(id)];
}

const Tensor& Tape::value(ValueId id) const { return node(id).out; }

bool Tape::any_needs_grad(ValueId a, ValueId b, ValueId c) const {
    if (a >= 0 && node(a).needs_grad) return true;
    if (b >= 0 && node(b).needs_grad) return true;
    if (c >= 0 && node(c).needs_grad) return true;
    return false;
}

Tape::ValueId Tape::param(Tensor& t) {
    auto it = param_ids_.find(&t);
    if (it != param_ids_.end()) return it->second;
    Node n;
    n.op = Op::kLeaf;
    n.out = Tensor(t.shape, t.data);
    n.needs_grad = true;
    n.bound = &t;
    ValueId id = push(std::move(n));
    param_ids_.emplace(&t, id);
    return id;
}

Tape::ValueId Tape::input(const Tensor& t) {
    Node n;
    n.op = Op::kLeaf;
    n.out = Tensor(t.shape, t.data);
    return push(std::move(n));
}

Tape::ValueId Tape::input(Tensor&& t) {
    Node n;
    n.op = Op::kLeaf;
    n.out = std::move(t);
    n.out.clear_grad();
    return push(std::move(n));
}

Tape::ValueId Tape::affine(ValueId xi, ValueId wi, ValueId bi) {
    const Tensor& x = value(xi);
    const Tensor& w = value(wi);
    const Tensor& b = value(bi);
    if (x.rank() != 2) rank_fail("affine", x, "rank-2 input [B,I]");
    if (w.rank() != 2 || x.shape[1] != w.shape[0]) shape_fail("affine", x, w);
    if (b.rank() != 1 || b.shape[0] != w.shape[1]) shape_fail("affine", w, b);

    const int B = x.shape[0], I = x.shape[1], O = w.shape[1];
    Tensor out = Tensor::zeros({B, O});
    for (int r = 0; r < B; ++r) {
        for (int o = 0; o < O; ++o) {
            double acc = b.data[o];
            for (int i = 0; i < I; ++i) acc += x.data[r * I + i] * w.data[i * O + o];
            out.data[r * O + o] = acc;
        }
    }
    Node n;
    n.op = Op::kAffine;
    n.out = std::move(out);
    n.in[0] = xi;
    n.in[1] = wi;
    n.in[2] = bi;
    n.n_in = 3;
    n.needs_grad = any_needs_grad(xi, wi, bi);
    return push(std::move(n));
}

Tape::ValueId Tape::conv2d(ValueId xi, ValueId ki, ValueId bi) {
    const Tensor& x = value(xi);
    const Tensor& k = value(ki);
    const Tensor& b = value(bi);
    if (x.rank() != 4) rank_fail("conv2d", x, "rank-4 input [B,H,W,C]");
    if (k.rank() != 4) rank_fail("conv2d", k, "rank-4 kernel [KH,KW,Ci,Co]");
    if (k.shape[2] != x.shape[3]) shape_fail("conv2d", x, k);
    if (k.shape[0] % 2 == 0 || k.shape[1] % 2 == 0) rank_fail("conv2d", k, "odd kernel dims");
    if (b.rank() != 1 || b.shape[0] != k.shape[3]) shape_fail("conv2d", k, b);

    const int B = x.shape[0], H = x.shape[1], W = x.shape[2], Ci = x.shape[3];
    const int KH = k.shape[0], KW = k.shape[1], Co = k.shape[3];
    const int ph = (KH - 1) / 2, pw = (KW - 1) / 2;
    Tensor out = Tensor::zeros({B, H, W, Co});
    for (int n0 = 0; n0 < B; ++n0) {
        for (int oh = 0; oh < H; ++oh) {
            for (int ow = 0; ow < W; ++ow) {
                for (int co = 0; co < Co; ++co) {
                    double acc = b.data[co];
                    for (int kh = 0; kh < KH; ++kh) {
                        const int ih = oh + kh - ph;
                        if (ih < 0 || ih >= H) continue;
                        for (int kw = 0; kw < KW; ++kw) {
                            const int iw = ow + kw - pw;
                            if (iw < 0 || iw >= W) continue;
                            for (int ci = 0; ci < Ci; ++ci) {
                                acc += x.data[((n0 * H + ih) * W + iw) * Ci + ci] *
                                       k.data[((kh * KW + kw) * Ci + ci) * Co + co];
                            }
                        }
                    }
                    out.data[((n0 * H + oh) * W + ow) * Co + co] = acc;
                }
            }
        }
    }
    Node n;
    n.op = Op::kConv2d;
    n.out = std::move(out);
    n.in[0] = xi;
    n.in[1] = ki;
    n.in[2] = bi;
    n.n_in = 3;
    n.needs_grad = any_needs_grad(xi, ki, bi);
    return push(std::move(n));
}

Tape::ValueId Tape::relu(ValueId xi) {
    const Tensor& x = value(xi);
    Tensor out = x;
    out.clear_grad();
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    Node n;
    n.op = Op::kRelu;
    n.out = std::move(out);
    n.in[0] = xi;
    n.n_in = 1;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::global_average_pool(ValueId xi) {
    const Tensor& x = value(xi);
    if (x.rank() != 4) rank_fail("global_average_pool", x, "rank-4 input [B,H,W,C]");
    const int B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
    const double inv = 1.0 / (static_cast<double>(H) * W);
    Tensor out = Tensor::zeros({B, C});
    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) {
                for (int c = 0; c < C; ++c) {
                    out.data[b * C + c] += x.data[((b * H + h) * W + w) * C + c];
                }
            }
        }
    }
    for (double& v : out.data) v *= inv;
    Node n;
    n.op = Op::kGap;
    n.out = std::move(out);
    n.in[0] = xi;
    n.n_in = 1;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::flatten(ValueId xi) {
    const Tensor& x = value(xi);
    if (x.rank() < 2) rank_fail("flatten", x, "rank >= 2");
    int rest = 1;
    for (size_t i = 1; i < x.shape.size(); ++i) rest *= x.shape[i];
    Tensor out({x.shape[0], rest}, x.data);
    Node n;
    n.op = Op::kFlatten;
    n.out = std::move(out);
    n.in[0] = xi;
    n.n_in = 1;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::add(ValueId ai, ValueId bi) {
    const Tensor& a = value(ai);
    const Tensor& b = value(bi);
    if (a.shape != b.shape) shape_fail("add", a, b);
    Tensor out = a;
    out.clear_grad();
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    Node n;
    n.op = Op::kAdd;
    n.out = std::move(out);
    n.in[0] = ai;
    n.in[1] = bi;
    n.n_in = 2;
    n.needs_grad = any_needs_grad(ai, bi);
    return push(std::move(n));
}

Tape::ValueId Tape::mul(ValueId ai, ValueId bi) {
    const Tensor& a = value(ai);
    const Tensor& b = value(bi);
    if (a.shape != b.shape) shape_fail("mul", a, b);
    Tensor out = a;
    out.clear_grad();
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    Node n;
    n.op = Op::kMul;
    n.out = std::move(out);
    n.in[0] = ai;
    n.in[1] = bi;
    n.n_in = 2;
    n.needs_grad = any_needs_grad(ai, bi);
    return push(std::move(n));
}

Tape::ValueId Tape::scalar_scale(ValueId xi, double c) {
    const Tensor& x = value(xi);
    Tensor out = x;
    out.clear_grad();
    for (double& v : out.data) v *= c;
    Node n;
    n.op = Op::kScalarScale;
    n.out = std::move(out);
    n.in[0] = xi;
    n.n_in = 1;
    n.attr = c;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::scale_by(ValueId xi, ValueId si) {
    const Tensor& x = value(xi);
    const Tensor& s = value(si);
    if (!s.is_scalar()) rank_fail("scale_by", s, "scalar scale");
    const double c = s.data[0];
    Tensor out = x;
    out.clear_grad();
    for (double& v : out.data) v *= c;
    Node n;
    n.op = Op::kScaleBy;
    n.out = std::move(out);
    n.in[0] = xi;
    n.in[1] = si;
    n.n_in = 2;
    n.needs_grad = any_needs_grad(xi, si);
    return push(std::move(n));
}

Tape::ValueId Tape::softmax(ValueId xi) {
    const Tensor& x = value(xi);
    if (x.rank() != 2) rank_fail("softmax", x, "rank-2 input [B,C]");
    const int B = x.shape[0], C = x.shape[1];
    Tensor out = Tensor::zeros({B, C});
    for (int b = 0; b < B; ++b) {
        const double* row = &x.data[static_cast<size_t>(b) * C];
        double m = *std::max_element(row, row + C);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(row[c] - m);
        for (int c = 0; c < C; ++c) out.data[b * C + c] = std::exp(row[c] - m) / z;
    }
    Node n;
    n.op = Op::kSoftmax;
    n.out = std::move(out);
    n.in[0] = xi;
    n.n_in = 1;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::log_softmax(ValueId xi) {
    const Tensor& x = value(xi);
    if (x.rank() != 2) rank_fail("log_softmax", x, "rank-2 input [B,C]");
    const int B = x.shape[0], C = x.shape[1];
    Tensor out = Tensor::zeros({B, C});
    for (int b = 0; b < B; ++b) {
        const double* row = &x.data[static_cast<size_t>(b) * C];
        double m = *std::max_element(row, row + C);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(row[c] - m);
        const double lz = m + std::log(z);
        for (int c = 0; c < C; ++c) out.data[b * C + c] = row[c] - lz;
    }
    Node n;
    n.op = Op::kLogSoftmax;
    n.out = std::move(out);
    n.in[0] = xi;
    n.n_in = 1;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::sum(ValueId xi) {
    const Tensor& x = value(xi);
    double acc = 0.0;
    for (double v : x.data) acc += v;
    Node n;
    n.op = Op::kSum;
    n.out = Tensor::scalar(acc);
    n.in[0] = xi;
    n.n_in = 1;
    n.needs_grad = any_needs_grad(xi);
    return push(std::move(n));
}

Tape::ValueId Tape::nll(ValueId li, std::vector<int> labels) {
    const Tensor& lp = value(li);
    if (lp.rank() != 2) rank_fail("nll", lp, "rank-2 log-probs [B,C]");
    const int B = lp.shape[0], C = lp.shape[1];
    if (static_cast<int>(labels.size()) != B) {
        throw ShapeError("nll: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(B));
    }
    double acc = 0.0;
    for (int b = 0; b < B; ++b) {
        const int y = labels[static_cast<size_t>(b)];
        if (y < 0 || y >= C) {
            throw ConfigError("nll: label " + std::to_string(y) + " out of range [0," +
                              std::to_string(C) + ") at row " + std::to_string(b));
        }
        acc -= lp.data[b * C + y];
    }
    Node n;
    n.op = Op::kNll;
    n.out = Tensor::scalar(acc / B);
    n.in[0] = li;
    n.n_in = 1;
    n.labels = std::move(labels);
    n.needs_grad = any_needs_grad(li);
    return push(std::move(n));
}

Tape::ValueId Tape::weighted_nll(ValueId li, ValueId pi) {
    const Tensor& lp = value(li);
    const Tensor& p = value(pi);
    if (lp.rank() != 2) rank_fail("weighted_nll", lp, "rank-2 log-probs [B,C]");
    if (p.shape != lp.shape) shape_fail("weighted_nll", lp, p);
    const int B = lp.shape[0];
    double acc = 0.0;
    for (size_t i = 0; i < lp.data.size(); ++i) acc -= p.data[i] * lp.data[i];
    Node n;
    n.op = Op::kWeightedNll;
    n.out = Tensor::scalar(acc / B);
    n.in[0] = li;
    n.in[1] = pi;
    n.n_in = 2;
    n.needs_grad = any_needs_grad(li, pi);
    return push(std::move(n));
}

void Tape::backward(ValueId loss) {
    if (consumed_) throw Error("tape: backward() called twice on the same tape");
    const Node& ln = node(loss);
    if (!ln.out.is_scalar()) {
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(ln.out.shape));
    }
    consumed_ = true;

    for (Node& n : nodes_) {
        if (n.needs_grad) n.grad.assign(n.out.data.size(), 0.0);
    }
    if (nodes_[static_cast<size_t>(loss)].needs_grad) {
        nodes_[static_cast<size_t>(loss)].grad[0] = 1.0;
    }

    for (size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.op == Op::kLeaf) continue;
        backprop_node(n);
    }

    for (Node& n : nodes_) {
        if (n.op == Op::kLeaf && n.bound != nullptr) {
            ensure_finite(n.grad, "backward (parameter gradient)");
            n.bound->grad = n.grad;
        }
    }
}

void Tape::backprop_node(Node& n) {
    const std::vector<double>& g = n.grad;
    auto in_val = [&](int idx) -> const Tensor& { return nodes_[static_cast<size_t>(n.in[idx])].out; };
    auto in_grad = [&](int idx) -> std::vector<double>* {
        Node& src = nodes_[static_cast<size_t>(n.in[idx])];
        return src.needs_grad ? &src.grad : nullptr;
    };

    switch (n.op) {
    case Op::kLeaf:
        break;
    case Op::kAffine: {
        const Tensor& x = in_val(0);
        const Tensor& w = in_val(1);
        const int B = x.shape[0], I = x.shape[1], O = w.shape[1];
        if (auto* gx = in_grad(0)) {
            for (int r = 0; r < B; ++r)
                for (int i = 0; i < I; ++i) {
                    double acc = 0.0;
                    for (int o = 0; o < O; ++o) acc += g[r * O + o] * w.data[i * O + o];
                    (*gx)[r * I + i] += acc;
                }
        }
        if (auto* gw = in_grad(1)) {
            for (int i = 0; i < I; ++i)
                for (int o = 0; o < O; ++o) {
                    double acc = 0.0;
                    for (int r = 0; r < B; ++r) acc += x.data[r * I + i] * g[r * O + o];
                    (*gw)[i * O + o] += acc;
                }
        }
        if (auto* gb = in_grad(2)) {
            for (int r = 0; r < B; ++r)
                for (int o = 0; o < O; ++o) (*gb)[o] += g[r * O + o];
        }
        break;
    }
    case Op::kConv2d: {
        const Tensor& x = in_val(0);
        const Tensor& k = in_val(1);
        const int B = x.shape[0], H = x.shape[1], W = x.shape[2], Ci = x.shape[3];
        const int KH = k.shape[0], KW = k.shape[1], Co = k.shape[3];
        const int ph = (KH - 1) / 2, pw = (KW - 1) / 2;
        auto* gx = in_grad(0);
        auto* gk = in_grad(1);
        auto* gb = in_grad(2);
        for (int n0 = 0; n0 < B; ++n0) {
            for (int oh = 0; oh < H; ++oh) {
                for (int ow = 0; ow < W; ++ow) {
                    for (int co = 0; co < Co; ++co) {
                        const double go = g[((n0 * H + oh) * W + ow) * Co + co];
                        if (gb) (*gb)[co] += go;
                        if (!gx && !gk) continue;
                        for (int kh = 0; kh < KH; ++kh) {
                            const int ih = oh + kh - ph;
                            if (ih < 0 || ih >= H) continue;
                            for (int kw = 0; kw < KW; ++kw) {
                                const int iw = ow + kw - pw;
                                if (iw < 0 || iw >= W) continue;
                                for (int ci = 0; ci < Ci; ++ci) {
                                    const size_t xo = ((n0 * H + ih) * W + iw) * Ci + ci;
                                    const size_t ko = ((kh * KW + kw) * Ci + ci) * Co + co;
                                    if (gx) (*gx)[xo] += go * k.data[ko];
                                    if (gk) (*gk)[ko] += go * x.data[xo];
                                }
                            }
                        }
                    }
                }
            }
        }
        break;
    }
    case Op::kRelu: {
        const Tensor& x = in_val(0);
        if (auto* gx = in_grad(0)) {
            for (size_t i = 0; i < g.size(); ++i)
                if (x.data[i] > 0.0) (*gx)[i] += g[i];
        }
        break;
    }
    case Op::kGap: {
        const Tensor& x = in_val(0);
        const int B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
        const double inv = 1.0 / (static_cast<double>(H) * W);
        if (auto* gx = in_grad(0)) {
            for (int b = 0; b < B; ++b)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        for (int c = 0; c < C; ++c)
                            (*gx)[((b * H + h) * W + w) * C + c] += g[b * C + c] * inv;
        }
        break;
    }
    case Op::kFlatten: {
        if (auto* gx = in_grad(0)) {
            for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        }
        break;
    }
    case Op::kAdd: {
        if (auto* ga = in_grad(0))
            for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = in_grad(1))
            for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
        break;
    }
    case Op::kMul: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        if (auto* ga = in_grad(0))
            for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.data[i];
        if (auto* gb = in_grad(1))
            for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.data[i];
        break;
    }
    case Op::kScalarScale: {
        if (auto* gx = in_grad(0))
            for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * n.attr;
        break;
    }
    case Op::kScaleBy: {
        const Tensor& x = in_val(0);
        const double c = in_val(1).data[0];
        if (auto* gx = in_grad(0))
            for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * c;
        if (auto* gs = in_grad(1)) {
            double acc = 0.0;
            for (size_t i = 0; i < g.size(); ++i) acc += g[i] * x.data[i];
            (*gs)[0] += acc;
        }
        break;
    }
    case Op::kSoftmax: {
        const Tensor& y = n.out;
        const int B = y.shape[0], C = y.shape[1];
        if (auto* gx = in_grad(0)) {
            for (int b = 0; b < B; ++b) {
                double dot = 0.0;
                for (int c = 0; c < C; ++c) dot += g[b * C + c] * y.data[b * C + c];
                for (int c = 0; c < C; ++c)
                    (*gx)[b * C + c] += y.data[b * C + c] * (g[b * C + c] - dot);
            }
        }
        break;
    }
    case Op::kLogSoftmax: {
        const Tensor& y = n.out;
        const int B = y.shape[0], C = y.shape[1];
        if (auto* gx = in_grad(0)) {
            for (int b = 0; b < B; ++b) {
                double gsum = 0.0;
                for (int c = 0; c < C; ++c) gsum += g[b * C + c];
                for (int c = 0; c < C; ++c)
                    (*gx)[b * C + c] += g[b * C + c] - std::exp(y.data[b * C + c]) * gsum;
            }
        }
        break;
    }
    case Op::kSum: {
        if (auto* gx = in_grad(0)) {
            for (double& v : *gx) v += g[0];
        }
        break;
    }
    case Op::kNll: {
        const Tensor& lp = in_val(0);
        const int B = lp.shape[0], C = lp.shape[1];
        if (auto* gl = in_grad(0)) {
            const double s = g[0] / B;
            for (int b = 0; b < B; ++b) (*gl)[b * C + n.labels[static_cast<size_t>(b)]] -= s;
        }
        break;
    }
    case Op::kWeightedNll: {
        const Tensor& lp = in_val(0);
        const Tensor& p = in_val(1);
        const int B = lp.shape[0];
        const double s = g[0] / B;
        if (auto* gl = in_grad(0))
            for (size_t i = 0; i < lp.data.size(); ++i) (*gl)[i] -= s * p.data[i];
        if (auto* gp = in_grad(1))
            for (size_t i = 0; i < lp.data.size(); ++i) (*gp)[i] -= s * lp.data[i];
        break;
    }
    }
}

} // namespace adanas
