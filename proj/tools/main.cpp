#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adanas/errors.hpp"
#include "adanas/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Iterative ensemble construction: train, evaluate, and report"};
    app.require_subcommand(1);

    std::string config_path;
    adanas::RunOverrides overrides;
    uint64_t seed_flag = 0;
    std::string out_flag;
    CLI::App* run = app.add_subcommand("run", "execute the search described by a config file");
    run->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    auto* seed_opt = run->add_option("--seed", seed_flag, "override the run seed");
    auto* out_opt = run->add_option("--out", out_flag, "override the output directory");
    run->add_option("--workers", overrides.workers, "parallel candidate trainers")
        ->check(CLI::PositiveNumber);

    std::string manifest_path;
    std::string eval_config;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "re-score a saved ensemble on the config's test split");
    evaluate->add_option("-m,--manifest", manifest_path, "ensemble.json path")->required();
    evaluate->add_option("-c,--config", eval_config, "experiment config (JSON)")->required();

    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    CLI::App* report =
        app.add_subcommand("report", "aggregate run directories into a table and scatter plot");
    report->add_option("dirs", report_dirs, "run directories (each with summary.json)")
        ->required();
    report->add_option("--out", report_out, "directory for report.txt and trajectory.svg");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (*seed_opt) overrides.seed = seed_flag;
            if (*out_opt) overrides.output_dir = out_flag;
            return adanas::cmd_run(config_path, overrides);
        }
        if (evaluate->parsed()) {
            return adanas::cmd_evaluate(manifest_path, eval_config);
        }
        return adanas::cmd_report(report_dirs, report_out);
    } catch (const adanas::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
