#include "adanas/config.hpp"

#include <fstream>
#include <initializer_list>

#include "adanas/errors.hpp"
#include "adanas/hash.hpp"

namespace adanas {

namespace {

void reject_unknown_keys(const nlohmann::json& obj, const char* where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
        }
    }
}

template <typename T>
T fetch(const nlohmann::json& obj, const char* where, const char* key, T fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("key \"") + key + "\" in " + where +
                          " has the wrong type");
    }
}

std::string fetch_str(const nlohmann::json& obj, const char* where, const char* key,
                      const std::string& fallback) {
    return fetch<std::string>(obj, where, key, fallback);
}

ArchSpec fetch_arch(const nlohmann::json& obj, const char* where, const char* key,
                    const ArchSpec& fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_string()) {
        throw ConfigError(std::string("key \"") + key + "\" in " + where +
                          " must be an \"X@Y\" string");
    }
    return ArchSpec::parse(it->get<std::string>());
}

} // namespace

void DatasetConfig::validate() const {
    if (kind == "synthetic") {
        parse_synthetic_kind(synthetic);
        if (classes < 2) throw ConfigError("dataset.classes must be >= 2");
        if (m_train < classes || m_test < classes) {
            throw ConfigError("dataset splits need at least one example per class");
        }
        if (noise < 0.0) throw ConfigError("dataset.noise must be nonnegative");
        return;
    }
    if (kind == "csv") {
        if (train_path.empty() || test_path.empty()) {
            throw ConfigError("csv dataset needs train_path and test_path");
        }
        if (num_classes < 2) throw ConfigError("csv dataset needs num_classes >= 2");
        return;
    }
    if (kind == "image_batch") {
        if (train_path.empty() || test_path.empty()) {
            throw ConfigError("image_batch dataset needs train_path and test_path");
        }
        return;
    }
    throw ConfigError("unknown dataset kind \"" + kind +
                      "\" (expected synthetic, csv, or image_batch)");
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown_keys(doc, "config root",
                        {"name", "dataset", "run", "generator", "augment", "output_dir",
                         "repeats"});

    ExperimentConfig cfg;
    cfg.name = fetch_str(doc, "config root", "name", cfg.name);
    cfg.repeats = fetch(doc, "config root", "repeats", cfg.repeats);
    if (cfg.repeats < 1) throw ConfigError("repeats must be >= 1");

    if (doc.contains("dataset")) {
        const auto& d = doc.at("dataset");
        reject_unknown_keys(d, "dataset",
                            {"kind", "synthetic", "m_train", "m_test", "classes", "noise",
                             "seed", "train_path", "test_path", "num_classes"});
        DatasetConfig& ds = cfg.dataset;
        ds.kind = fetch_str(d, "dataset", "kind", ds.kind);
        ds.synthetic = fetch_str(d, "dataset", "synthetic", ds.synthetic);
        ds.m_train = fetch(d, "dataset", "m_train", ds.m_train);
        ds.m_test = fetch(d, "dataset", "m_test", ds.m_test);
        ds.classes = fetch(d, "dataset", "classes", ds.classes);
        ds.noise = fetch(d, "dataset", "noise", ds.noise);
        ds.seed = fetch(d, "dataset", "seed", ds.seed);
        ds.train_path = fetch_str(d, "dataset", "train_path", ds.train_path);
        ds.test_path = fetch_str(d, "dataset", "test_path", ds.test_path);
        ds.num_classes = fetch(d, "dataset", "num_classes", ds.num_classes);
    }
    cfg.dataset.validate();

    RunConfig& run = cfg.run;
    if (doc.contains("run")) {
        const auto& r = doc.at("run");
        reject_unknown_keys(r, "run",
                            {"iterations", "kd_mode", "kd_temperature", "weight_mode",
                             "lambda_kd", "steps_per_iteration", "batch_size", "base_lr",
                             "momentum", "clip_norm", "weight_update_every", "metrics_every",
                             "seed"});
        run.iterations = fetch(r, "run", "iterations", run.iterations);
        run.kd.variant = parse_kd_variant(fetch_str(r, "run", "kd_mode",
                                                    kd_variant_str(run.kd.variant)));
        run.kd.temperature = fetch(r, "run", "kd_temperature", run.kd.temperature);
        run.weight_mode = parse_weight_mode(fetch_str(r, "run", "weight_mode",
                                                      weight_mode_str(run.weight_mode)));
        run.lambda_kd = fetch(r, "run", "lambda_kd", run.lambda_kd);
        run.steps_per_iteration = fetch(r, "run", "steps_per_iteration",
                                        run.steps_per_iteration);
        run.batch_size = fetch(r, "run", "batch_size", run.batch_size);
        run.base_lr = fetch(r, "run", "base_lr", run.base_lr);
        run.momentum = fetch(r, "run", "momentum", run.momentum);
        run.clip_norm = fetch(r, "run", "clip_norm", run.clip_norm);
        run.weight_update_every = fetch(r, "run", "weight_update_every",
                                        run.weight_update_every);
        run.metrics_every = fetch(r, "run", "metrics_every", run.metrics_every);
        run.seed = fetch(r, "run", "seed", run.seed);
    }

    GeneratorSpec& gen = run.generator;
    // Desk-scale defaults: constant 1@8 proposals, budget loose enough to
    // never bind unless the config tightens it.
    gen.constant_arch = ArchSpec{1, 8};
    gen.start_arch = ArchSpec{1, 8};
    gen.budget = 1000000;
    if (doc.contains("generator")) {
        const auto& g = doc.at("generator");
        reject_unknown_keys(g, "generator",
                            {"kind", "constant_arch", "start_arch", "depth_increment",
                             "width_increment", "budget"});
        gen.kind = parse_generator_kind(fetch_str(g, "generator", "kind",
                                                  generator_kind_str(gen.kind)));
        gen.constant_arch = fetch_arch(g, "generator", "constant_arch", *gen.constant_arch);
        gen.start_arch = fetch_arch(g, "generator", "start_arch", *gen.start_arch);
        gen.depth_increment = fetch(g, "generator", "depth_increment", gen.depth_increment);
        gen.width_increment = fetch(g, "generator", "width_increment", gen.width_increment);
        gen.budget = fetch(g, "generator", "budget", gen.budget);
    }

    AugmentConfig& aug = run.augment;
    if (doc.contains("augment")) {
        const auto& a = doc.at("augment");
        reject_unknown_keys(a, "augment",
                            {"pad_to", "crop_to", "flip", "whiten", "cutout_size"});
        aug.pad_to = fetch(a, "augment", "pad_to", aug.pad_to);
        aug.crop_to = fetch(a, "augment", "crop_to", aug.crop_to);
        aug.flip = fetch(a, "augment", "flip", aug.flip);
        aug.whiten = fetch(a, "augment", "whiten", aug.whiten);
        aug.cutout_size = fetch(a, "augment", "cutout_size", aug.cutout_size);
    }

    cfg.output_dir = fetch_str(doc, "config root", "output_dir", "runs/" + cfg.name);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_experiment_config(doc);
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json doc;
    doc["name"] = cfg.name;
    doc["repeats"] = cfg.repeats;

    nlohmann::json d;
    d["kind"] = cfg.dataset.kind;
    if (cfg.dataset.kind == "synthetic") {
        d["synthetic"] = cfg.dataset.synthetic;
        d["m_train"] = cfg.dataset.m_train;
        d["m_test"] = cfg.dataset.m_test;
        d["classes"] = cfg.dataset.classes;
        d["noise"] = cfg.dataset.noise;
        d["seed"] = cfg.dataset.seed;
    } else {
        d["train_path"] = cfg.dataset.train_path;
        d["test_path"] = cfg.dataset.test_path;
        if (cfg.dataset.kind == "csv") d["num_classes"] = cfg.dataset.num_classes;
    }
    doc["dataset"] = std::move(d);

    const RunConfig& run = cfg.run;
    nlohmann::json r;
    r["iterations"] = run.iterations;
    r["kd_mode"] = kd_variant_str(run.kd.variant);
    r["kd_temperature"] = run.kd.temperature;
    r["weight_mode"] = weight_mode_str(run.weight_mode);
    r["lambda_kd"] = run.lambda_kd;
    r["steps_per_iteration"] = run.steps_per_iteration;
    r["batch_size"] = run.batch_size;
    r["base_lr"] = run.base_lr;
    r["momentum"] = run.momentum;
    r["clip_norm"] = run.clip_norm;
    r["weight_update_every"] = run.weight_update_every;
    r["metrics_every"] = run.metrics_every;
    r["seed"] = run.seed;
    doc["run"] = std::move(r);

    const GeneratorSpec& gen = run.generator;
    nlohmann::json g;
    g["kind"] = generator_kind_str(gen.kind);
    if (gen.kind == GeneratorKind::CONSTANT) {
        g["constant_arch"] = gen.constant_arch->str();
    } else {
        g["start_arch"] = gen.start_arch->str();
        g["depth_increment"] = gen.depth_increment;
        g["width_increment"] = gen.width_increment;
    }
    g["budget"] = gen.budget;
    doc["generator"] = std::move(g);

    const AugmentConfig& aug = run.augment;
    nlohmann::json a;
    a["pad_to"] = aug.pad_to;
    a["crop_to"] = aug.crop_to;
    a["flip"] = aug.flip;
    a["whiten"] = aug.whiten;
    a["cutout_size"] = aug.cutout_size;
    doc["augment"] = std::move(a);
    return doc;
}

uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a(config_json(cfg).dump());
}

Dataset build_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    if (cfg.kind == "synthetic") {
        return synthetic_task(parse_synthetic_kind(cfg.synthetic), cfg.m_train, cfg.m_test,
                              cfg.classes, cfg.noise, cfg.seed);
    }
    Dataset ds;
    if (cfg.kind == "csv") {
        load_csv(cfg.train_path, cfg.num_classes, ds.train_features, ds.train_labels);
        load_csv(cfg.test_path, cfg.num_classes, ds.test_features, ds.test_labels);
        if (ds.train_features.shape[1] != ds.test_features.shape[1]) {
            throw IoError("train and test CSVs disagree on feature count");
        }
        ds.name = cfg.train_path;
        ds.task.input_dims = {ds.train_features.shape[1]};
        ds.task.num_classes = cfg.num_classes;
        return ds;
    }
    TaskShape train_task;
    TaskShape test_task;
    load_image_batch(cfg.train_path, ds.train_features, ds.train_labels, train_task);
    load_image_batch(cfg.test_path, ds.test_features, ds.test_labels, test_task);
    if (!(train_task == test_task)) {
        throw IoError("train and test image batches disagree on shape or classes");
    }
    ds.name = cfg.train_path;
    ds.task = train_task;
    return ds;
}

} // namespace adanas
