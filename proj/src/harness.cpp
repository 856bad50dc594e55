#include "adanas/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "json.hpp"

#include "adanas/config.hpp"
#include "adanas/errors.hpp"
#include "adanas/hash.hpp"

namespace adanas {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
}

nlohmann::json member_summary(const Ensemble& ens, const Tensor& test_eval,
                              const std::vector<int>& test_labels) {
    nlohmann::json members = nlohmann::json::array();
    for (int k = 0; k < ens.size(); ++k) {
        const Subnetwork& m = *ens.members[k];
        const EvalResult solo = evaluate_mixture({&m}, {1.0}, test_eval, test_labels);
        nlohmann::json rec;
        rec["arch"] = m.arch.str();
        rec["iteration_born"] = m.iteration_born;
        rec["weight"] = ens.weights[k];
        rec["param_count"] = m.params.total_count();
        rec["checksum"] = hex_u64(m.checksum());
        rec["standalone_test_error"] = solo.error_rate;
        members.push_back(std::move(rec));
    }
    return members;
}

nlohmann::json iteration_json(const IterationReport& it) {
    nlohmann::json rec;
    rec["iteration"] = it.iteration;
    rec["selected"] = it.selected;
    rec["selected_checksum"] = hex_u64(it.selected_checksum);
    rec["ensemble_loss"] = it.ensemble_loss;
    rec["ensemble_error"] = it.ensemble_error;
    rec["ensemble_params"] = it.ensemble_params;
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : it.candidates) {
        nlohmann::json cj;
        cj["index"] = c.index;
        cj["arch"] = c.arch.str();
        cj["params"] = c.params;
        cj["final_objective"] = c.final_objective;
        cj["selection_loss"] = c.selection_loss;
        cj["selection_error"] = c.selection_error;
        cj["weights"] = c.weights;
        cj["diverged"] = c.diverged;
        cj["kd_degraded"] = c.kd_degraded;
        if (!c.note.empty()) cj["note"] = c.note;
        cands.push_back(std::move(cj));
    }
    rec["candidates"] = std::move(cands);
    return rec;
}

struct LoadedRun {
    std::string dir;
    nlohmann::json summary;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string format_pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

} // namespace

int cmd_run(const std::string& config_path, const RunOverrides& overrides) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (overrides.seed) cfg.run.seed = *overrides.seed;
    if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
    cfg.run.workers = overrides.workers;

    const Dataset dataset = build_dataset(cfg.dataset);
    cfg.run.validate(dataset.task);
    const nlohmann::json effective = config_json(cfg);
    const std::string chash = hex_u64(config_hash(cfg));
    const std::string dhash = hex_u64(dataset.content_hash());

    const Tensor test_eval = eval_features(dataset.test_features, dataset.task, cfg.run.augment);

    fs::create_directories(cfg.output_dir);
    const auto total_t0 = std::chrono::steady_clock::now();
    std::vector<double> test_errors;
    std::vector<std::string> run_dirs;
    nlohmann::json seeds = nlohmann::json::array();

    for (int r = 0; r < cfg.repeats; ++r) {
        RunConfig run_cfg = cfg.run;
        run_cfg.seed = cfg.run.seed + static_cast<uint64_t>(r);
        const fs::path dir = fs::path(cfg.output_dir) / ("seed_" + std::to_string(run_cfg.seed));
        fs::create_directories(dir);
        const auto run_t0 = std::chrono::steady_clock::now();

        MetricsLog log((dir / "metrics.log").string());
        {
            nlohmann::json start;
            start["type"] = "run_start";
            start["config_hash"] = chash;
            start["dataset_hash"] = dhash;
            start["seed"] = run_cfg.seed;
            log.append(start.dump());
        }

        const RunResult result = run(run_cfg, dataset, &log);
        save_ensemble(result.ensemble, (dir / "checkpoints").string());

        const EvalResult train_final =
            ensemble_loss(result.ensemble,
                          eval_features(dataset.train_features, dataset.task, run_cfg.augment),
                          dataset.train_labels);
        const EvalResult test_final =
            ensemble_loss(result.ensemble, test_eval, dataset.test_labels);
        test_errors.push_back(test_final.error_rate);
        seeds.push_back(run_cfg.seed);
        run_dirs.push_back(dir.filename().string());

        nlohmann::json manifest;
        manifest["config_hash"] = chash;
        manifest["dataset_hash"] = dhash;
        manifest["seed"] = run_cfg.seed;
        manifest["ensemble"] = "checkpoints/ensemble.json";
        manifest["ensemble_params"] = result.ensemble.total_param_count();
        manifest["members"] = member_summary(result.ensemble, test_eval, dataset.test_labels);
        write_text(dir / "manifest.json", manifest.dump(2) + "\n");

        nlohmann::json summary;
        summary["config"] = effective;
        summary["config_hash"] = chash;
        summary["dataset_hash"] = dhash;
        summary["seed"] = run_cfg.seed;
        summary["stopped_by_budget"] = result.stopped_by_budget;
        nlohmann::json iterations = nlohmann::json::array();
        nlohmann::json iteration_seconds = nlohmann::json::array();
        for (const auto& it : result.iterations) {
            iterations.push_back(iteration_json(it));
            iteration_seconds.push_back(it.seconds);
        }
        summary["iterations"] = std::move(iterations);
        nlohmann::json final_block;
        final_block["train_loss"] = train_final.loss;
        final_block["train_error"] = train_final.error_rate;
        final_block["test_loss"] = test_final.loss;
        final_block["test_error"] = test_final.error_rate;
        final_block["ensemble_params"] = result.ensemble.total_param_count();
        final_block["members"] = member_summary(result.ensemble, test_eval, dataset.test_labels);
        summary["final"] = std::move(final_block);
        nlohmann::json timing;
        timing["run_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                              run_t0)
                                    .count();
        timing["iteration_seconds"] = std::move(iteration_seconds);
        summary["timing"] = std::move(timing);
        write_text(dir / "summary.json", summary.dump(2) + "\n");

        std::cout << "seed " << run_cfg.seed << ": test error "
                  << format_pct(test_final.error_rate) << "%, " << result.ensemble.size()
                  << " members, " << result.ensemble.total_param_count() << " params\n";
    }

    nlohmann::json aggregate;
    aggregate["name"] = cfg.name;
    aggregate["config"] = effective;
    aggregate["config_hash"] = chash;
    aggregate["dataset_hash"] = dhash;
    aggregate["seeds"] = std::move(seeds);
    aggregate["runs"] = run_dirs;
    aggregate["test_errors"] = test_errors;
    const double mean = mean_of(test_errors);
    aggregate["mean_test_error"] = mean;
    if (test_errors.size() > 1) {
        aggregate["std_test_error"] = sample_std(test_errors, mean);
    }
    nlohmann::json timing;
    timing["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - total_t0).count();
    aggregate["timing"] = std::move(timing);
    write_text(fs::path(cfg.output_dir) / "summary.json", aggregate.dump(2) + "\n");

    std::cout << cfg.name << ": mean test error " << format_pct(mean) << "%";
    if (test_errors.size() > 1) {
        std::cout << " +/- " << format_pct(sample_std(test_errors, mean)) << "%";
    }
    std::cout << " over " << test_errors.size() << " seed(s)\n";
    return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& config_path) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const Dataset dataset = build_dataset(cfg.dataset);
    const Ensemble ens = load_ensemble(manifest_path, dataset.task);

    const Tensor test_eval = eval_features(dataset.test_features, dataset.task, cfg.run.augment);
    const EvalResult ev = ensemble_loss(ens, test_eval, dataset.test_labels);

    nlohmann::json out;
    out["manifest"] = manifest_path;
    out["dataset_hash"] = hex_u64(dataset.content_hash());
    out["weight_mode"] = weight_mode_str(ens.weight_mode);
    out["weights"] = ens.weights;
    out["test_loss"] = ev.loss;
    out["test_error"] = ev.error_rate;
    out["members"] = member_summary(ens, test_eval, dataset.test_labels);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) throw Error("report needs at least one run directory");

    std::vector<LoadedRun> runs;
    for (const auto& dir : run_dirs) {
        const fs::path path = fs::path(dir) / "summary.json";
        std::ifstream is(path);
        if (!is) {
            std::cerr << "warning: skipping " << dir << " (no summary.json)\n";
            continue;
        }
        nlohmann::json doc;
        try {
            is >> doc;
        } catch (const nlohmann::json::exception&) {
            std::cerr << "warning: skipping " << dir << " (unreadable summary.json)\n";
            continue;
        }
        if (!doc.contains("final") || !doc.contains("config")) {
            std::cerr << "warning: skipping " << dir << " (incomplete run)\n";
            continue;
        }
        runs.push_back({dir, std::move(doc)});
    }
    if (runs.empty()) throw Error("no completed run directories to report on");

    const std::string dhash = runs.front().summary.at("dataset_hash").get<std::string>();
    for (const auto& r : runs) {
        const std::string h = r.summary.at("dataset_hash").get<std::string>();
        if (h != dhash) {
            throw Error("run " + r.dir + " was produced on a different dataset (" + h +
                        " vs " + dhash + "); refusing to aggregate");
        }
    }

    // Group runs by config hash; each group becomes one table row.
    std::map<std::string, std::vector<const LoadedRun*>> groups;
    for (const auto& r : runs) {
        groups[r.summary.at("config_hash").get<std::string>()].push_back(&r);
    }

    std::string table;
    table += "config                        kd    weights  gen                runs  "
             "test error %     params\n";
    for (const auto& [hash, group] : groups) {
        const nlohmann::json& cfg = group.front()->summary.at("config");
        std::vector<double> errors;
        std::vector<double> params;
        for (const auto* r : group) {
            errors.push_back(r->summary.at("final").at("test_error").get<double>());
            params.push_back(r->summary.at("final").at("ensemble_params").get<double>());
        }
        const double mean = mean_of(errors);
        std::string error_cell = format_pct(mean);
        if (errors.size() > 1) error_cell += " +/- " + format_pct(sample_std(errors, mean));
        char line[256];
        std::snprintf(line, sizeof(line), "%-28s  %-4s  %-7s  %-17s  %4zu  %-15s  %7.0f\n",
                      cfg.at("name").get<std::string>().c_str(),
                      cfg.at("run").at("kd_mode").get<std::string>().c_str(),
                      cfg.at("run").at("weight_mode").get<std::string>().c_str(),
                      cfg.at("generator").at("kind").get<std::string>().c_str(), group.size(),
                      error_cell.c_str(), mean_of(params));
        table += line;
    }

    // Scatter of selected architectures: one point per ensemble member.
    struct Point {
        double depth;
        double width;
        size_t series;
    };
    std::vector<Point> points;
    std::vector<std::string> series_names;
    {
        size_t series = 0;
        for (const auto& [hash, group] : groups) {
            series_names.push_back(group.front()->summary.at("config").at("name")
                                       .get<std::string>());
            for (const auto* r : group) {
                for (const auto& m : r->summary.at("final").at("members")) {
                    const ArchSpec arch = ArchSpec::parse(m.at("arch").get<std::string>());
                    points.push_back({static_cast<double>(arch.depth),
                                      static_cast<double>(arch.width), series});
                }
            }
            ++series;
        }
    }
    double max_depth = 1.0;
    double max_width = 1.0;
    for (const auto& p : points) {
        max_depth = std::max(max_depth, p.depth);
        max_width = std::max(max_width, p.width);
    }
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    const int plot_w = 480;
    const int plot_h = 360;
    const int margin = 48;
    auto sx = [&](double d) { return margin + d / (max_depth + 1.0) * plot_w; };
    auto sy = [&](double w) { return margin + plot_h - w / (max_width * 1.1) * plot_h; };
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           std::to_string(plot_w + 2 * margin) + "\" height=\"" +
           std::to_string(plot_h + 2 * margin) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", margin,
                  margin + plot_h, margin + plot_w, margin + plot_h);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", margin,
                  margin, margin, margin + plot_h);
    svg += buf;
    svg += "<text x=\"" + std::to_string(margin + plot_w / 2) + "\" y=\"" +
           std::to_string(margin + plot_h + 32) + "\" text-anchor=\"middle\">cells</text>\n";
    svg += "<text x=\"14\" y=\"" + std::to_string(margin + plot_h / 2) +
           "\" transform=\"rotate(-90 14 " + std::to_string(margin + plot_h / 2) +
           ")\" text-anchor=\"middle\">channels</text>\n";
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf),
                      "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"%s\" "
                      "fill-opacity=\"0.55\"/>\n",
                      sx(p.depth), sy(p.width), kColors[p.series % 6]);
        svg += buf;
    }
    for (size_t s = 0; s < series_names.size(); ++s) {
        std::snprintf(buf, sizeof(buf),
                      "<circle cx=\"%d\" cy=\"%zu\" r=\"5\" fill=\"%s\"/>"
                      "<text x=\"%d\" y=\"%zu\">%s</text>\n",
                      margin + plot_w - 120, margin + 16 * s + 8, kColors[s % 6],
                      margin + plot_w - 108, margin + 16 * s + 12, series_names[s].c_str());
        svg += buf;
    }
    svg += "</svg>\n";

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.txt", table);
    write_text(fs::path(out_dir) / "trajectory.svg", svg);
    std::cout << table;
    std::cout << "wrote " << (fs::path(out_dir) / "report.txt").string() << " and "
              << (fs::path(out_dir) / "trajectory.svg").string() << "\n";
    return 0;
}

} // namespace adanas
