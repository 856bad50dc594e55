#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "adanas/data.hpp"
#include "adanas/driver.hpp"

namespace adanas {

// Where the training data comes from: a deterministic synthetic task, a
// label-first CSV pair, or a binary image-batch pair.
struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | csv | image_batch
    std::string synthetic = "spirals";
    int m_train = 300;
    int m_test = 100;
    int classes = 3;
    double noise = 0.1;
    uint64_t seed = 7;
    std::string train_path;
    std::string test_path;
    int num_classes = 0;  // csv only; image batches carry their own class count

    void validate() const;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DatasetConfig dataset;
    RunConfig run;  // carries the generator and augmentation blocks
    std::string output_dir;  // defaults to runs/<name>
    int repeats = 1;
};

// Parses and validates a config file. Unknown keys anywhere are errors that
// name the key; so are wrong value types. Missing keys take the documented
// defaults.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

// The effective config (defaults filled in), as stable JSON. The config hash
// is the FNV-1a of its canonical dump and is recorded in every artifact.
// Execution details that cannot change any result (output_dir, workers) are
// excluded, so reruns of one experiment hash alike wherever they land.
nlohmann::json config_json(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);

// Materializes the dataset a config describes.
Dataset build_dataset(const DatasetConfig& cfg);

} // namespace adanas
