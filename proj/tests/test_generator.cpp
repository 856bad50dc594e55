#include "doctest.h"

#include "adanas/errors.hpp"
#include "adanas/generator.hpp"
#include "adanas/subnetwork.hpp"

using namespace adanas;

namespace {

const TaskShape kTask{{2}, 3};

GeneratorSpec dynamic_spec(ArchSpec start, int64_t budget, bool reconsider = false,
                           int depth_inc = 1, int width_inc = 240) {
    GeneratorSpec gen;
    gen.kind = reconsider ? GeneratorKind::DYNAMIC_RECONSIDER : GeneratorKind::DYNAMIC;
    gen.start_arch = start;
    gen.depth_increment = depth_inc;
    gen.width_increment = width_inc;
    gen.budget = budget;
    return gen;
}

} // namespace

TEST_CASE("generator kind names round-trip") {
    for (GeneratorKind k :
         {GeneratorKind::CONSTANT, GeneratorKind::DYNAMIC, GeneratorKind::DYNAMIC_RECONSIDER}) {
        CHECK(parse_generator_kind(generator_kind_str(k)) == k);
    }
    CHECK_THROWS_AS(parse_generator_kind("random"), ConfigError);
}

TEST_CASE("spec validation catches incomplete configurations") {
    GeneratorSpec gen;
    gen.budget = 0;
    CHECK_THROWS_AS(gen.validate(), ConfigError); // non-positive budget
    gen.budget = 1000;
    CHECK_THROWS_AS(gen.validate(), ConfigError); // constant kind without an arch
    gen.constant_arch = ArchSpec{1, 8};
    CHECK_NOTHROW(gen.validate());

    GeneratorSpec dyn;
    dyn.kind = GeneratorKind::DYNAMIC;
    dyn.budget = 1000;
    CHECK_THROWS_AS(dyn.validate(), ConfigError); // missing start_arch
    dyn.start_arch = ArchSpec{1, 8};
    CHECK_NOTHROW(dyn.validate());
    dyn.depth_increment = 0;
    CHECK_THROWS_AS(dyn.validate(), ConfigError);
    dyn.depth_increment = 1;
    dyn.width_increment = -8;
    CHECK_THROWS_AS(dyn.validate(), ConfigError);
}

TEST_CASE("constant generators re-propose one architecture forever") {
    GeneratorSpec gen;
    gen.constant_arch = ArchSpec{1, 8};
    gen.budget = 1'000'000;
    CHECK(propose(gen, std::nullopt, 0, kTask) == CandidateSet{ArchSpec{1, 8}});
    // The previous selection is irrelevant to a constant generator.
    CHECK(propose(gen, ArchSpec{5, 64}, 400, kTask) == CandidateSet{ArchSpec{1, 8}});
}

TEST_CASE("dynamic generators grow the previous selection") {
    const GeneratorSpec gen = dynamic_spec({1, 480}, 100'000'000);
    const CandidateSet got = propose(gen, ArchSpec{1, 480}, 0, kTask);
    CHECK(got == CandidateSet{ArchSpec{2, 480}, ArchSpec{1, 720}});

    // Deeper comes before wider, always.
    const CandidateSet big = propose(gen, ArchSpec{6, 768}, 0, kTask);
    CHECK(big == CandidateSet{ArchSpec{7, 768}, ArchSpec{6, 1008}});
}

TEST_CASE("iteration one grows the start architecture") {
    const GeneratorSpec gen = dynamic_spec({3, 32}, 100'000'000, false, 2, 16);
    const CandidateSet got = propose(gen, std::nullopt, 0, kTask);
    CHECK(got == CandidateSet{ArchSpec{5, 32}, ArchSpec{3, 48}});
}

TEST_CASE("reconsider re-proposes the selection after the two moves") {
    const GeneratorSpec gen = dynamic_spec({1, 480}, 100'000'000, true);
    const CandidateSet got = propose(gen, ArchSpec{1, 480}, 0, kTask);
    CHECK(got == CandidateSet{ArchSpec{2, 480}, ArchSpec{1, 720}, ArchSpec{1, 480}});
    // At iteration 1 the start architecture itself is the third proposal.
    const CandidateSet first = propose(gen, std::nullopt, 0, kTask);
    CHECK(first.back() == ArchSpec{1, 480});
}

TEST_CASE("budget checks are inclusive at the boundary") {
    // 1@8 on the 2-feature 3-class task holds exactly 123 parameters.
    CHECK(param_count({1, 8}, kTask) == 123);
    CHECK(check_budget(0, {1, 8}, 123, kTask));
    CHECK_FALSE(check_budget(0, {1, 8}, 122, kTask));
    CHECK(check_budget(400, {1, 8}, 523, kTask));
    CHECK_FALSE(check_budget(401, {1, 8}, 523, kTask));
}

TEST_CASE("over-budget candidates are filtered individually") {
    // From 1@8: deeper 2@8 holds 195 parameters, wider 1@16 holds 371.
    GeneratorSpec gen = dynamic_spec({1, 8}, 200, false, 1, 8);
    CHECK(propose(gen, std::nullopt, 0, kTask) == CandidateSet{ArchSpec{2, 8}});
    gen.budget = 371;
    CHECK(propose(gen, std::nullopt, 0, kTask) ==
          CandidateSet{ArchSpec{2, 8}, ArchSpec{1, 16}});
    gen.budget = 194;
    CHECK(propose(gen, std::nullopt, 0, kTask).empty());
}

TEST_CASE("a constant generator exhausts its budget after a fixed member count") {
    GeneratorSpec gen;
    gen.constant_arch = ArchSpec{1, 8};
    gen.budget = 4 * 123;
    int64_t total = 0;
    int members = 0;
    while (true) {
        const CandidateSet set = propose(gen, std::nullopt, total, kTask);
        if (set.empty()) break;
        total += param_count(set[0], kTask);
        ++members;
    }
    CHECK(members == 4);
    CHECK(total == 492);
}
