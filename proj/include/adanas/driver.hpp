#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adanas/data.hpp"
#include "adanas/ensemble.hpp"
#include "adanas/generator.hpp"
#include "adanas/losses.hpp"

namespace adanas {

// Everything one search run needs besides the dataset. Defaults follow the
// reference training recipe: batch 32, lr 0.025 on a per-iteration cosine
// schedule, momentum 0.9, gradient clipping at global norm 5.
struct RunConfig {
    int iterations = 3;
    KDMode kd;
    WeightMode weight_mode = WeightMode::UNIFORM;
    GeneratorSpec generator;
    AugmentConfig augment;

    int steps_per_iteration = 1000;
    int batch_size = 32;
    double base_lr = 0.025;
    double momentum = 0.9;
    double clip_norm = 5.0;
    double lambda_kd = 1.0;
    int weight_update_every = 100;  // candidate steps between w updates (LEARNED)
    int metrics_every = 50;         // steps between metrics records

    uint64_t seed = 1;
    int workers = 1;

    void validate(const TaskShape& task) const;
};

// Root of all per-candidate randomness. Derived purely from (run seed,
// iteration, candidate index) so results do not depend on worker scheduling,
// and so a candidate can be retrained standalone with an identical
// trajectory.
uint64_t candidate_seed(uint64_t run_seed, int iteration, int candidate_index);

struct CandidateReport {
    int index = 0;
    ArchSpec arch;
    int64_t params = 0;
    double final_objective = 0.0;
    std::vector<double> weights;     // full mixture vector, candidate slot last
    double selection_loss = 0.0;     // L_f of prev ensemble + candidate, train set
    double selection_error = 0.0;
    bool diverged = false;
    bool kd_degraded = false;        // BAN/AKD fell back to no-KD (no teacher yet)
    std::string note;                // divergence reason when diverged
    double seconds = 0.0;
};

struct IterationReport {
    int iteration = 0;
    std::vector<CandidateReport> candidates;
    int selected = -1;               // index into candidates
    uint64_t selected_checksum = 0;  // winner's parameter checksum when frozen
    double ensemble_loss = 0.0;      // train-set loss after adding the winner
    double ensemble_error = 0.0;
    int64_t ensemble_params = 0;
    double seconds = 0.0;
};

struct RunResult {
    Ensemble ensemble;
    std::vector<IterationReport> iterations;
    bool stopped_by_budget = false;
};

// Append-only JSONL sink for per-step and per-iteration records. Pass null
// to run() to drop metrics.
class MetricsLog {
  public:
    explicit MetricsLog(const std::string& path);
    ~MetricsLog();
    MetricsLog(const MetricsLog&) = delete;
    MetricsLog& operator=(const MetricsLog&) = delete;

    void append(const std::string& json_line);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Trains one candidate architecture against the frozen previous ensemble:
// steps_per_iteration momentum-SGD steps over a fresh cosine arc, optional KD
// against prev_subnetwork (BAN) or prev_ensemble (AKD), and, in LEARNED mode,
// one mixture-weight update on the current mini-batch every
// weight_update_every steps. Returns the trained net (unfrozen), the mixture
// vector, and buffered metrics lines.
struct TrainedCandidate {
    std::shared_ptr<Subnetwork> net;
    CandidateReport report;
    std::vector<std::string> metric_lines;
};

TrainedCandidate train_candidate(const ArchSpec& arch, int iteration, int candidate_index,
                                 const Ensemble& prev_ensemble,
                                 const Subnetwork* prev_subnetwork, const RunConfig& config,
                                 const Dataset& dataset);

// Argmin over surviving candidates of the train-set loss of (previous
// ensemble + candidate with its weight vector). Ties break toward the
// lexicographically smaller architecture, then the smaller index. Fills
// out_evals (parallel to nets) when given.
int select_best(const Ensemble& prev_ensemble, const std::vector<const Subnetwork*>& nets,
                const std::vector<ArchSpec>& archs,
                const std::vector<std::vector<double>>& weight_vectors,
                const Tensor& eval_features, const std::vector<int>& labels,
                std::vector<EvalResult>* out_evals = nullptr);

// The full search loop: propose, train candidates (fanned out over
// config.workers), select, freeze, grow, until config.iterations complete or
// the generator's budget stops proposing.
RunResult run(const RunConfig& config, const Dataset& dataset, MetricsLog* metrics = nullptr);

} // namespace adanas
