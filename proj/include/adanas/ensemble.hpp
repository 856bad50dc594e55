#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adanas/subnetwork.hpp"

namespace adanas {

enum class WeightMode { UNIFORM, LEARNED };

std::string weight_mode_str(WeightMode m);
WeightMode parse_weight_mode(const std::string& s);

// Ordered frozen subnetworks plus a mixture-weight vector. Ensemble logits
// are the weighted sum of member logits, mixed before the softmax.
struct Ensemble {
    std::vector<std::shared_ptr<const Subnetwork>> members;
    std::vector<double> weights;
    WeightMode weight_mode = WeightMode::UNIFORM;

    int size() const { return static_cast<int>(members.size()); }
    bool empty() const { return members.empty(); }
    int64_t total_param_count() const;

    // Appends a frozen member. UNIFORM mode resets all weights to 1/size;
    // LEARNED mode adopts `learned` (length size()+1 before the call).
    void add_member(std::shared_ptr<const Subnetwork> net,
                    const std::vector<double>* learned = nullptr);

    // Checks weight/member length match, frozen members, and the exact-1/i
    // rule in UNIFORM mode.
    void validate() const;
};

// Length-i vector of exact 1/i entries; i < 1 is an error.
std::vector<double> uniform_weights(int i);

// Weighted-sum logits over an explicit net/weight list: the core mixture
// kernel. All forwards are gradient-free.
Tensor mixture_logits(const std::vector<const Subnetwork*>& nets,
                      const std::vector<double>& weights, const Tensor& batch);

// Mixture logits of the ensemble itself, and of the ensemble with a trailing
// extra candidate. `full_weights` covers members plus the extra slot; the
// overload without it uses ens.weights. Empty ensemble with no extra throws.
Tensor ensemble_logits(const Ensemble& ens, const Tensor& batch);
Tensor ensemble_logits(const Ensemble& ens, const Tensor& batch,
                       const Subnetwork& extra, const std::vector<double>& full_weights);

struct EvalResult {
    double loss = 0.0;
    double error_rate = 0.0;
};

// Mean cross entropy and top-1 error of the mixture over (features, labels),
// evaluated in fixed row order (chunked internally; chunk size does not
// change the result).
EvalResult evaluate_mixture(const std::vector<const Subnetwork*>& nets,
                            const std::vector<double>& weights,
                            const Tensor& features, const std::vector<int>& labels);
EvalResult ensemble_loss(const Ensemble& ens, const Tensor& features,
                         const std::vector<int>& labels);

// Candidate-local mixture weights: previous members plus the candidate slot.
struct MixtureWeightState {
    std::vector<double> w;
    double lr = 0.01;
};

// Uniform 1/total start; total counts the candidate slot.
MixtureWeightState make_mixture_state(int total_members);

// `steps` full-batch gradient-descent updates of state.w on the mixture's
// classification loss over (features, labels). Member and candidate logits
// are constants: no gradient touches any subnetwork parameter.
void train_mixture_weights(MixtureWeightState& state, const Ensemble& prev,
                           const Subnetwork& candidate, const Tensor& features,
                           const std::vector<int>& labels, int steps);

// Manifest: weight mode, weight vector, and ordered member records
// (checkpoint file name, arch, iteration_born, param count, checksum).
// save_ensemble writes member_XX.ckpt files plus ensemble.json into dir;
// ensemble_manifest_json is the exact manifest text, byte-stable for a given
// ensemble.
std::string ensemble_manifest_json(const Ensemble& ens);
void save_ensemble(const Ensemble& ens, const std::string& dir);
Ensemble load_ensemble(const std::string& manifest_path, const TaskShape& task);

} // namespace adanas
