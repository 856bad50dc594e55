#include "adanas/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "adanas/errors.hpp"
#include "adanas/hash.hpp"

namespace adanas {

namespace {

constexpr int kEvalChunk = 256;

std::string member_checkpoint_name(int index_1based) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "member_%02d.ckpt", index_1based);
    return buf;
}

// Rowwise log-softmax of one chunk of logits, reused by the eval path.
void log_softmax_rows(const Tensor& logits, std::vector<double>& out) {
    const int b = logits.shape[0];
    const int c = logits.shape[1];
    out.resize(static_cast<size_t>(b) * c);
    for (int r = 0; r < b; ++r) {
        const double* row = logits.data.data() + static_cast<size_t>(r) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double total = 0.0;
        for (int j = 0; j < c; ++j) total += std::exp(row[j] - mx);
        const double lse = mx + std::log(total);
        for (int j = 0; j < c; ++j) out[static_cast<size_t>(r) * c + j] = row[j] - lse;
    }
}

Tensor slice_rows(const Tensor& t, int begin, int count) {
    std::vector<int> shape = t.shape;
    shape[0] = count;
    const int64_t row = shape_numel(shape) / count;
    Tensor out = Tensor::zeros(shape);
    std::copy_n(t.data.data() + begin * row, count * row, out.data.data());
    return out;
}

} // namespace

std::string weight_mode_str(WeightMode m) {
    return m == WeightMode::UNIFORM ? "uniform" : "learned";
}

WeightMode parse_weight_mode(const std::string& s) {
    if (s == "uniform") return WeightMode::UNIFORM;
    if (s == "learned") return WeightMode::LEARNED;
    throw ConfigError("unknown weight_mode \"" + s + "\" (expected uniform or learned)");
}

int64_t Ensemble::total_param_count() const {
    int64_t n = 0;
    for (const auto& m : members) n += m->params.total_count();
    return n;
}

void Ensemble::add_member(std::shared_ptr<const Subnetwork> net,
                          const std::vector<double>* learned) {
    if (!net->frozen) throw Error("ensemble members must be frozen before joining");
    // Validate before mutating so a failed add leaves the ensemble intact.
    if (weight_mode == WeightMode::LEARNED &&
        (!learned || static_cast<int>(learned->size()) != size() + 1)) {
        throw Error("learned-mode add_member needs a weight vector of length " +
                    std::to_string(size() + 1));
    }
    members.push_back(std::move(net));
    weights = weight_mode == WeightMode::UNIFORM ? uniform_weights(size()) : *learned;
}

void Ensemble::validate() const {
    if (weights.size() != members.size()) {
        throw Error("ensemble has " + std::to_string(members.size()) + " members but " +
                    std::to_string(weights.size()) + " weights");
    }
    for (size_t i = 0; i < members.size(); ++i) {
        if (!members[i]->frozen) {
            throw Error("ensemble member " + std::to_string(i + 1) + " is not frozen");
        }
    }
    if (weight_mode == WeightMode::UNIFORM) {
        const double expect = 1.0 / static_cast<double>(size());
        for (double w : weights) {
            if (w != expect) throw Error("uniform-mode ensemble carries non-uniform weights");
        }
    }
}

std::vector<double> uniform_weights(int i) {
    if (i < 1) throw Error("uniform_weights needs at least one member, got " + std::to_string(i));
    return std::vector<double>(i, 1.0 / static_cast<double>(i));
}

Tensor mixture_logits(const std::vector<const Subnetwork*>& nets,
                      const std::vector<double>& weights, const Tensor& batch) {
    if (nets.empty()) throw Error("mixture_logits over zero networks");
    if (nets.size() != weights.size()) {
        throw Error("mixture_logits: " + std::to_string(nets.size()) + " networks vs " +
                    std::to_string(weights.size()) + " weights");
    }
    Tensor sum = eager_logits(*nets[0], batch);
    for (double& v : sum.data) v *= weights[0];
    for (size_t k = 1; k < nets.size(); ++k) {
        const Tensor zk = eager_logits(*nets[k], batch);
        if (zk.shape != sum.shape) {
            throw ShapeError("mixture member " + std::to_string(k + 1) + " emits " +
                             shape_str(zk.shape) + ", expected " + shape_str(sum.shape));
        }
        for (size_t j = 0; j < sum.data.size(); ++j) sum.data[j] += weights[k] * zk.data[j];
    }
    return sum;
}

Tensor ensemble_logits(const Ensemble& ens, const Tensor& batch) {
    if (ens.empty()) throw Error("ensemble_logits on an empty ensemble with no candidate");
    std::vector<const Subnetwork*> nets;
    nets.reserve(ens.members.size());
    for (const auto& m : ens.members) nets.push_back(m.get());
    return mixture_logits(nets, ens.weights, batch);
}

Tensor ensemble_logits(const Ensemble& ens, const Tensor& batch,
                       const Subnetwork& extra, const std::vector<double>& full_weights) {
    if (static_cast<int>(full_weights.size()) != ens.size() + 1) {
        throw Error("ensemble_logits with extra needs " + std::to_string(ens.size() + 1) +
                    " weights, got " + std::to_string(full_weights.size()));
    }
    std::vector<const Subnetwork*> nets;
    nets.reserve(ens.members.size() + 1);
    for (const auto& m : ens.members) nets.push_back(m.get());
    nets.push_back(&extra);
    return mixture_logits(nets, full_weights, batch);
}

EvalResult evaluate_mixture(const std::vector<const Subnetwork*>& nets,
                            const std::vector<double>& weights,
                            const Tensor& features, const std::vector<int>& labels) {
    const int n = features.shape[0];
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("evaluate_mixture: " + std::to_string(n) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    double loss_sum = 0.0;
    int64_t wrong = 0;
    std::vector<double> logp;
    for (int begin = 0; begin < n; begin += kEvalChunk) {
        const int count = std::min(kEvalChunk, n - begin);
        const Tensor logits = mixture_logits(nets, weights, slice_rows(features, begin, count));
        const int c = logits.shape[1];
        log_softmax_rows(logits, logp);
        for (int r = 0; r < count; ++r) {
            const int label = labels[begin + r];
            if (label < 0 || label >= c) {
                throw Error("evaluate_mixture: label " + std::to_string(label) + " at row " +
                            std::to_string(begin + r) + " outside [0," + std::to_string(c) + ")");
            }
            const double* row = logits.data.data() + static_cast<size_t>(r) * c;
            int argmax = 0;
            for (int j = 1; j < c; ++j) {
                if (row[j] > row[argmax]) argmax = j;
            }
            if (argmax != label) ++wrong;
            loss_sum += -logp[static_cast<size_t>(r) * c + label];
        }
    }
    EvalResult out;
    out.loss = loss_sum / n;
    out.error_rate = static_cast<double>(wrong) / n;
    return out;
}

EvalResult ensemble_loss(const Ensemble& ens, const Tensor& features,
                         const std::vector<int>& labels) {
    if (ens.empty()) throw Error("ensemble_loss on an empty ensemble");
    std::vector<const Subnetwork*> nets;
    for (const auto& m : ens.members) nets.push_back(m.get());
    return evaluate_mixture(nets, ens.weights, features, labels);
}

MixtureWeightState make_mixture_state(int total_members) {
    MixtureWeightState state;
    state.w = uniform_weights(total_members);
    return state;
}

void train_mixture_weights(MixtureWeightState& state, const Ensemble& prev,
                           const Subnetwork& candidate, const Tensor& features,
                           const std::vector<int>& labels, int steps) {
    const int k_total = prev.size() + 1;
    if (static_cast<int>(state.w.size()) != k_total) {
        throw Error("mixture state has " + std::to_string(state.w.size()) +
                    " weights for " + std::to_string(k_total) + " networks");
    }
    // Nets and data are fixed across steps, so all logits are constants
    // computed once. This is the stop-gradient contract: only w moves.
    std::vector<Tensor> logits;
    logits.reserve(k_total);
    for (const auto& m : prev.members) logits.push_back(eager_logits(*m, features));
    logits.push_back(eager_logits(candidate, features));

    for (int step = 0; step < steps; ++step) {
        Tape tape;
        std::vector<Tensor> w_leaves;
        w_leaves.reserve(k_total);
        for (int k = 0; k < k_total; ++k) {
            w_leaves.push_back(Tensor::scalar(state.w[k]));
        }
        Tape::ValueId mix = -1;
        for (int k = 0; k < k_total; ++k) {
            const Tape::ValueId term = tape.scale_by(tape.input(logits[k]), tape.param(w_leaves[k]));
            mix = (k == 0) ? term : tape.add(mix, term);
        }
        const Tape::ValueId loss = tape.nll(tape.log_softmax(mix), labels);
        tape.backward(loss);
        for (int k = 0; k < k_total; ++k) {
            state.w[k] -= state.lr * w_leaves[k].grad[0];
        }
    }
}

std::string ensemble_manifest_json(const Ensemble& ens) {
    ens.validate();
    nlohmann::json doc;
    doc["format"] = "adanas-ensemble-v1";
    doc["weight_mode"] = weight_mode_str(ens.weight_mode);
    doc["weights"] = ens.weights;
    nlohmann::json members = nlohmann::json::array();
    for (int i = 0; i < ens.size(); ++i) {
        const Subnetwork& m = *ens.members[i];
        nlohmann::json rec;
        rec["checkpoint"] = member_checkpoint_name(i + 1);
        rec["arch"] = m.arch.str();
        rec["iteration_born"] = m.iteration_born;
        rec["param_count"] = m.params.total_count();
        rec["checksum"] = hex_u64(m.checksum());
        members.push_back(std::move(rec));
    }
    doc["members"] = std::move(members);
    return doc.dump(2) + "\n";
}

void save_ensemble(const Ensemble& ens, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < ens.size(); ++i) {
        save_checkpoint(*ens.members[i],
                        (std::filesystem::path(dir) / member_checkpoint_name(i + 1)).string());
    }
    const std::string manifest = ensemble_manifest_json(ens);
    const auto path = std::filesystem::path(dir) / "ensemble.json";
    std::ofstream os(path);
    if (!os) throw IoError("cannot write ensemble manifest " + path.string());
    os << manifest;
}

Ensemble load_ensemble(const std::string& manifest_path, const TaskShape& task) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open ensemble manifest " + manifest_path);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed ensemble manifest " + manifest_path + ": " + e.what());
    }
    if (doc.value("format", "") != "adanas-ensemble-v1") {
        throw IoError("unrecognized manifest format in " + manifest_path);
    }
    Ensemble ens;
    ens.weight_mode = parse_weight_mode(doc.at("weight_mode").get<std::string>());
    ens.weights = doc.at("weights").get<std::vector<double>>();
    const auto base = std::filesystem::path(manifest_path).parent_path();
    for (const auto& rec : doc.at("members")) {
        const std::string ref = rec.at("checkpoint").get<std::string>();
        Subnetwork net = load_checkpoint((base / ref).string(), task);
        const std::string want_sum = rec.at("checksum").get<std::string>();
        if (hex_u64(net.checksum()) != want_sum) {
            throw IoError("member " + ref + " checksum " + hex_u64(net.checksum()) +
                          " does not match manifest " + want_sum);
        }
        if (net.arch.str() != rec.at("arch").get<std::string>()) {
            throw IoError("member " + ref + " is " + net.arch.str() + " but manifest says " +
                          rec.at("arch").get<std::string>());
        }
        ens.members.push_back(std::make_shared<const Subnetwork>(std::move(net)));
    }
    ens.validate();
    return ens;
}

} // namespace adanas
