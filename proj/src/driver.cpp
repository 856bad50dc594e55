#include "adanas/driver.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "adanas/errors.hpp"
#include "adanas/optim.hpp"

namespace adanas {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

void RunConfig::validate(const TaskShape& task) const {
    task.validate();
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (steps_per_iteration < 1) throw ConfigError("steps_per_iteration must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    if (lambda_kd < 0.0) throw ConfigError("lambda_kd must be nonnegative");
    if (weight_update_every < 1) throw ConfigError("weight_update_every must be >= 1");
    if (metrics_every < 1) throw ConfigError("metrics_every must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    kd.validate();
    generator.validate();
    augment.validate(task);
}

uint64_t candidate_seed(uint64_t run_seed, int iteration, int candidate_index) {
    return SplitRng(run_seed)
        .split("candidate")
        .split(static_cast<uint64_t>(iteration))
        .split(static_cast<uint64_t>(candidate_index))
        .state();
}

struct MetricsLog::Impl {
    std::ofstream os;
};

MetricsLog::MetricsLog(const std::string& path) : impl_(new Impl) {
    impl_->os.open(path, std::ios::app);
    if (!impl_->os) throw IoError("cannot open metrics log " + path);
}

MetricsLog::~MetricsLog() = default;

void MetricsLog::append(const std::string& json_line) {
    impl_->os << json_line << '\n';
    impl_->os.flush();
}

TrainedCandidate train_candidate(const ArchSpec& arch, int iteration, int candidate_index,
                                 const Ensemble& prev_ensemble,
                                 const Subnetwork* prev_subnetwork, const RunConfig& config,
                                 const Dataset& dataset) {
    const auto t0 = std::chrono::steady_clock::now();
    const SplitRng root(candidate_seed(config.seed, iteration, candidate_index));

    TrainedCandidate out;
    out.report.index = candidate_index;
    out.report.arch = arch;
    out.net = std::make_shared<Subnetwork>(
        build_subnetwork(arch, dataset.task, root.split("init").state()));
    out.net->iteration_born = iteration;
    out.report.params = out.net->params.total_count();

    TrainStream stream(dataset.train_features, dataset.train_labels, dataset.task,
                       config.augment, config.batch_size, root.split("data"));
    OptimizerState opt = OptimizerState::create(out.net->params, config.steps_per_iteration,
                                                config.base_lr, config.momentum,
                                                config.clip_norm);
    const bool learned = config.weight_mode == WeightMode::LEARNED;
    MixtureWeightState wstate = make_mixture_state(prev_ensemble.size() + 1);

    Tensor batch_x;
    std::vector<int> batch_y;
    for (int step = 0; step < config.steps_per_iteration; ++step) {
        stream.next_batch(batch_x, batch_y);
        double objective = 0.0;
        ClipResult clip;
        double lr = 0.0;
        try {
            Tape tape;
            const Tape::ValueId logits = subnetwork_logits(tape, *out.net, batch_x);
            bool degraded = false;
            const auto kd = kd_loss(tape, config.kd, prev_ensemble, prev_subnetwork, logits,
                                    batch_x, &degraded);
            if (degraded && step == 0) out.report.kd_degraded = true;
            const Tape::ValueId obj =
                candidate_objective(tape, logits, batch_y, kd, config.lambda_kd);
            objective = tape.value(obj).data[0];
            tape.backward(obj);
            lr = sgd_momentum_step(out.net->params, opt, &clip);
        } catch (const NumericError& e) {
            out.report.diverged = true;
            out.report.note = e.what();
            nlohmann::json rec;
            rec["type"] = "divergence";
            rec["iteration"] = iteration;
            rec["candidate"] = candidate_index;
            rec["arch"] = arch.str();
            rec["step"] = step;
            rec["reason"] = e.what();
            out.metric_lines.push_back(rec.dump());
            break;
        }
        out.report.final_objective = objective;

        if (step % config.metrics_every == 0 || step + 1 == config.steps_per_iteration) {
            nlohmann::json rec;
            rec["type"] = "step";
            rec["iteration"] = iteration;
            rec["candidate"] = candidate_index;
            rec["arch"] = arch.str();
            rec["step"] = step;
            rec["loss"] = objective;
            rec["lr"] = lr;
            rec["grad_norm"] = clip.pre_norm;
            rec["clipped"] = clip.clipped;
            out.metric_lines.push_back(rec.dump());
        }
        if (learned && !prev_ensemble.empty() && (step + 1) % config.weight_update_every == 0) {
            train_mixture_weights(wstate, prev_ensemble, *out.net, batch_x, batch_y, 1);
        }
    }

    if (out.report.kd_degraded) {
        nlohmann::json rec;
        rec["type"] = "kd_degraded";
        rec["iteration"] = iteration;
        rec["candidate"] = candidate_index;
        rec["mode"] = kd_variant_str(config.kd.variant);
        rec["reason"] = "no teacher exists yet; trained without distillation";
        out.metric_lines.push_back(rec.dump());
    }
    out.report.weights = learned ? wstate.w : uniform_weights(prev_ensemble.size() + 1);
    out.report.seconds = seconds_since(t0);
    return out;
}

int select_best(const Ensemble& prev_ensemble, const std::vector<const Subnetwork*>& nets,
                const std::vector<ArchSpec>& archs,
                const std::vector<std::vector<double>>& weight_vectors,
                const Tensor& eval_features, const std::vector<int>& labels,
                std::vector<EvalResult>* out_evals) {
    if (nets.empty()) throw Error("select_best over zero candidates");
    if (nets.size() != archs.size() || nets.size() != weight_vectors.size()) {
        throw Error("select_best: candidate lists disagree in length");
    }
    std::vector<const Subnetwork*> mixture;
    for (const auto& m : prev_ensemble.members) mixture.push_back(m.get());
    mixture.push_back(nullptr);

    int best = -1;
    EvalResult best_eval;
    if (out_evals) out_evals->assign(nets.size(), {});
    for (size_t j = 0; j < nets.size(); ++j) {
        mixture.back() = nets[j];
        const EvalResult ev = evaluate_mixture(mixture, weight_vectors[j], eval_features, labels);
        if (out_evals) (*out_evals)[j] = ev;
        const bool better =
            best < 0 || ev.loss < best_eval.loss ||
            (ev.loss == best_eval.loss && archs[j] < archs[best]);
        if (better) {
            best = static_cast<int>(j);
            best_eval = ev;
        }
    }
    return best;
}

RunResult run(const RunConfig& config, const Dataset& dataset, MetricsLog* metrics) {
    config.validate(dataset.task);
    if (dataset.train_size() < 1) throw Error("run needs a nonempty training split");

    RunResult result;
    result.ensemble.weight_mode = config.weight_mode;
    std::optional<ArchSpec> prev_selected;
    std::shared_ptr<const Subnetwork> prev_subnetwork;

    // Selection is hold-out-free: it scores candidates on the full training
    // set through the deterministic eval-mode pipeline.
    const Tensor train_eval =
        eval_features(dataset.train_features, dataset.task, config.augment);

    for (int iteration = 1; iteration <= config.iterations; ++iteration) {
        const auto iter_t0 = std::chrono::steady_clock::now();
        const CandidateSet cands = propose(config.generator, prev_selected,
                                           result.ensemble.total_param_count(), dataset.task);
        if (cands.empty()) {
            result.stopped_by_budget = true;
            if (metrics) {
                nlohmann::json rec;
                rec["type"] = "budget_stop";
                rec["iteration"] = iteration;
                rec["ensemble_params"] = result.ensemble.total_param_count();
                rec["budget"] = config.generator.budget;
                metrics->append(rec.dump());
            }
            break;
        }

        // Fan out candidate training; results land in fixed slots so worker
        // count never changes anything downstream.
        std::vector<TrainedCandidate> trained(cands.size());
        {
            std::atomic<size_t> cursor{0};
            std::exception_ptr first_error;
            std::mutex error_mu;
            auto work = [&]() {
                while (true) {
                    const size_t j = cursor.fetch_add(1);
                    if (j >= cands.size()) return;
                    try {
                        trained[j] = train_candidate(cands[j], iteration, static_cast<int>(j),
                                                     result.ensemble, prev_subnetwork.get(),
                                                     config, dataset);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mu);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            };
            const size_t n_workers = std::min<size_t>(config.workers, cands.size());
            if (n_workers <= 1) {
                work();
            } else {
                std::vector<std::thread> pool;
                for (size_t t = 0; t < n_workers; ++t) pool.emplace_back(work);
                for (auto& th : pool) th.join();
            }
            if (first_error) std::rethrow_exception(first_error);
        }

        if (metrics) {
            for (const auto& tc : trained) {
                for (const auto& line : tc.metric_lines) metrics->append(line);
            }
        }

        std::vector<const Subnetwork*> nets;
        std::vector<ArchSpec> archs;
        std::vector<std::vector<double>> weight_vectors;
        std::vector<size_t> survivors;
        for (size_t j = 0; j < trained.size(); ++j) {
            if (trained[j].report.diverged) continue;
            survivors.push_back(j);
            nets.push_back(trained[j].net.get());
            archs.push_back(trained[j].report.arch);
            weight_vectors.push_back(trained[j].report.weights);
        }
        if (survivors.empty()) {
            throw Error("iteration " + std::to_string(iteration) +
                        ": every candidate diverged; run cannot continue");
        }

        std::vector<EvalResult> evals;
        const int best_surviving = select_best(result.ensemble, nets, archs, weight_vectors,
                                               train_eval, dataset.train_labels, &evals);
        const size_t winner = survivors[static_cast<size_t>(best_surviving)];

        IterationReport report;
        report.iteration = iteration;
        for (size_t j = 0; j < trained.size(); ++j) {
            report.candidates.push_back(trained[j].report);
        }
        for (size_t s = 0; s < survivors.size(); ++s) {
            report.candidates[survivors[s]].selection_loss = evals[s].loss;
            report.candidates[survivors[s]].selection_error = evals[s].error_rate;
        }
        report.selected = static_cast<int>(winner);

        TrainedCandidate& chosen = trained[winner];
        chosen.net->frozen = true;
        report.selected_checksum = chosen.net->checksum();
        std::shared_ptr<const Subnetwork> member = chosen.net;
        result.ensemble.add_member(member, &chosen.report.weights);
        prev_selected = chosen.report.arch;
        prev_subnetwork = member;

        const EvalResult after =
            ensemble_loss(result.ensemble, train_eval, dataset.train_labels);
        report.ensemble_loss = after.loss;
        report.ensemble_error = after.error_rate;
        report.ensemble_params = result.ensemble.total_param_count();
        report.seconds = seconds_since(iter_t0);

        if (metrics) {
            nlohmann::json rec;
            rec["type"] = "iteration";
            rec["iteration"] = iteration;
            rec["selected"] = report.selected;
            rec["selected_arch"] = chosen.report.arch.str();
            rec["ensemble_loss"] = report.ensemble_loss;
            rec["ensemble_error"] = report.ensemble_error;
            rec["ensemble_params"] = report.ensemble_params;
            nlohmann::json cand_list = nlohmann::json::array();
            for (const auto& c : report.candidates) {
                nlohmann::json cj;
                cj["index"] = c.index;
                cj["arch"] = c.arch.str();
                cj["params"] = c.params;
                cj["final_objective"] = c.final_objective;
                cj["selection_loss"] = c.selection_loss;
                cj["selection_error"] = c.selection_error;
                cj["weights"] = c.weights;
                cj["diverged"] = c.diverged;
                if (!c.note.empty()) cj["note"] = c.note;
                cand_list.push_back(std::move(cj));
            }
            rec["candidates"] = std::move(cand_list);
            rec["seconds"] = report.seconds;
            metrics->append(rec.dump());
        }
        result.iterations.push_back(std::move(report));
    }
    return result;
}

} // namespace adanas
