#include "adanas/generator.hpp"

#include <algorithm>

#include "adanas/errors.hpp"
#include "adanas/subnetwork.hpp"

namespace adanas {

std::string generator_kind_str(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::CONSTANT: return "constant";
        case GeneratorKind::DYNAMIC: return "dynamic";
        case GeneratorKind::DYNAMIC_RECONSIDER: return "dynamic_reconsider";
    }
    throw Error("unreachable generator kind");
}

GeneratorKind parse_generator_kind(const std::string& s) {
    if (s == "constant") return GeneratorKind::CONSTANT;
    if (s == "dynamic") return GeneratorKind::DYNAMIC;
    if (s == "dynamic_reconsider") return GeneratorKind::DYNAMIC_RECONSIDER;
    throw ConfigError("unknown generator kind \"" + s +
                      "\" (expected constant, dynamic, or dynamic_reconsider)");
}

void GeneratorSpec::validate() const {
    if (budget < 1) throw ConfigError("generator budget must be positive");
    if (kind == GeneratorKind::CONSTANT) {
        if (!constant_arch) throw ConfigError("constant generator needs constant_arch");
        constant_arch->validate();
        return;
    }
    if (!start_arch) throw ConfigError(generator_kind_str(kind) + " generator needs start_arch");
    start_arch->validate();
    if (depth_increment < 1 || width_increment < 1) {
        throw ConfigError("generator increments must be >= 1");
    }
}

bool check_budget(int64_t prev_total, const ArchSpec& candidate, int64_t budget,
                  const TaskShape& task) {
    return prev_total + param_count(candidate, task) <= budget;
}

CandidateSet propose(const GeneratorSpec& gen, const std::optional<ArchSpec>& prev_selected,
                     int64_t prev_total, const TaskShape& task) {
    gen.validate();
    CandidateSet raw;
    if (gen.kind == GeneratorKind::CONSTANT) {
        raw.push_back(*gen.constant_arch);
    } else {
        // Moves apply to last iteration's selection; the configured start
        // architecture stands in for it at iteration 1.
        const ArchSpec base = prev_selected ? *prev_selected : *gen.start_arch;
        raw.push_back({base.depth + gen.depth_increment, base.width});
        raw.push_back({base.depth, base.width + gen.width_increment});
        if (gen.kind == GeneratorKind::DYNAMIC_RECONSIDER) {
            raw.push_back(base);
        }
    }

    CandidateSet out;
    for (const ArchSpec& cand : raw) {
        if (std::find(out.begin(), out.end(), cand) != out.end()) continue;
        if (!check_budget(prev_total, cand, gen.budget, task)) continue;
        out.push_back(cand);
    }
    return out;
}

} // namespace adanas
