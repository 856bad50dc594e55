#include "adanas/arch.hpp"

#include <charconv>

#include "adanas/errors.hpp"
#include "adanas/tensor.hpp"

namespace adanas {

std::string ArchSpec::str() const { return std::to_string(depth) + "@" + std::to_string(width); }

ArchSpec ArchSpec::parse(std::string_view text) {
    const size_t at = text.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 >= text.size()) {
        throw ConfigError("bad architecture string '" + std::string(text) + "', expected \"X@Y\"");
    }
    auto parse_int = [&](std::string_view part) {
        int v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc() || p != part.data() + part.size()) {
            throw ConfigError("bad architecture component '" + std::string(part) + "' in '" +
                              std::string(text) + "'");
        }
        return v;
    };
    ArchSpec a{parse_int(text.substr(0, at)), parse_int(text.substr(at + 1))};
    a.validate();
    return a;
}

void ArchSpec::validate() const {
    if (depth < 1 || width < 1) {
        throw ConfigError("architecture " + str() + " must have depth >= 1 and width >= 1");
    }
}

int64_t TaskShape::input_size() const { return shape_numel(input_dims); }

void TaskShape::validate() const {
    if (input_dims.size() != 1 && input_dims.size() != 3) {
        throw ConfigError("task input dims must be {features} or {H,W,C}, got " +
                          shape_str(input_dims));
    }
    for (int d : input_dims) {
        if (d < 1) throw ConfigError("task input dims must be positive, got " + shape_str(input_dims));
    }
    if (num_classes < 2) throw ConfigError("task needs at least 2 classes");
}

} // namespace adanas
