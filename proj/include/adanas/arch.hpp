#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace adanas {

// Architecture descriptor in X@Y notation: X stacked cells at Y channels.
// Ordering is lexicographic on (depth, width) and is used for deterministic
// tie-breaking during candidate selection.
struct ArchSpec {
    int depth = 1;
    int width = 1;

    auto operator<=>(const ArchSpec&) const = default;

    std::string str() const;                       // "6@768"
    static ArchSpec parse(std::string_view text);  // throws ConfigError

    void validate() const;  // depth >= 1, width >= 1
};

// Input geometry and class count of a classification task. input_dims is
// either {features} for flat tasks or {H, W, C} for image tasks.
struct TaskShape {
    std::vector<int> input_dims;
    int num_classes = 0;

    bool operator==(const TaskShape&) const = default;

    bool is_image() const { return input_dims.size() == 3; }
    int64_t input_size() const;
    void validate() const;
};

} // namespace adanas
