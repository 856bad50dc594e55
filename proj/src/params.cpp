#include "adanas/params.hpp"

#include "adanas/errors.hpp"
#include "adanas/hash.hpp"

namespace adanas {

Tensor& ParameterVector::add(std::string name, Tensor init) {
    for (const auto& existing : names_) {
        if (existing == name) throw ConfigError("duplicate parameter name '" + name + "'");
    }
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(init));
    return tensors_.back();
}

int64_t ParameterVector::total_count() const {
    int64_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
}

uint64_t ParameterVector::checksum() const {
    uint64_t h = kFnvOffsetBasis;
    for (const auto& t : tensors_) h = fnv1a_f64_span(t.data, h);
    return h;
}

void ParameterVector::clear_grads() {
    for (auto& t : tensors_) t.clear_grad();
}

} // namespace adanas
