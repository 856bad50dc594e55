#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adanas/arch.hpp"

namespace adanas {

enum class GeneratorKind { CONSTANT, DYNAMIC, DYNAMIC_RECONSIDER };

std::string generator_kind_str(GeneratorKind k);
GeneratorKind parse_generator_kind(const std::string& s);

// Candidate-architecture proposal rule plus the total-parameter budget the
// growing ensemble must stay within.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::CONSTANT;
    std::optional<ArchSpec> constant_arch;
    std::optional<ArchSpec> start_arch;
    int depth_increment = 1;
    int width_increment = 8;
    int64_t budget = 0;

    void validate() const;
};

// Ordered proposals for one iteration; empty means the budget stopped the run.
using CandidateSet = std::vector<ArchSpec>;

// True iff adding the candidate keeps the ensemble at or under budget.
bool check_budget(int64_t prev_total, const ArchSpec& candidate, int64_t budget,
                  const TaskShape& task);

// Proposals for the next iteration. `prev_selected` is the architecture
// chosen last iteration (nullopt at iteration 1), `prev_total` the current
// ensemble parameter count. CONSTANT always re-proposes its one architecture;
// DYNAMIC proposes deeper and wider moves applied to the previous selection
// (the start architecture at iteration 1); DYNAMIC_RECONSIDER additionally
// re-proposes the previous selection itself. Over-budget candidates are
// filtered out; duplicates keep their first occurrence.
CandidateSet propose(const GeneratorSpec& gen, const std::optional<ArchSpec>& prev_selected,
                     int64_t prev_total, const TaskShape& task);

} // namespace adanas
