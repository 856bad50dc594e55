#pragma once

#include <optional>
#include <string>
#include <vector>

namespace adanas {

struct RunOverrides {
    std::optional<uint64_t> seed;        // replaces run.seed for the first repeat
    std::optional<std::string> output_dir;
    int workers = 1;
};

// Executes `repeats` seeded searches (seeds run.seed, run.seed+1, ...), each
// into output_dir/seed_<seed>/ with manifest.json, checkpoints/, metrics.log,
// and summary.json, then writes the aggregate summary.json at the root.
// Returns 0 on success; config problems throw ConfigError (exit code 2 at the
// CLI), anything else propagates as an ordinary error (exit code 1).
int cmd_run(const std::string& config_path, const RunOverrides& overrides);

// Re-scores a saved ensemble manifest on the config's test split and prints
// the metrics as JSON. Fails if any member checkpoint is missing or fails its
// checksum.
int cmd_evaluate(const std::string& manifest_path, const std::string& config_path);

// Aggregates completed run directories (those with a summary.json) into a
// comparison table (stdout + report.txt) and a depth-vs-width scatter of the
// selected architectures (trajectory.svg). Refuses to mix runs over different
// datasets; skips incomplete directories with a warning.
int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

} // namespace adanas
