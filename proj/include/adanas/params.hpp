#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adanas/tensor.hpp"

namespace adanas {

// Named parameter tensors with a stable iteration order (insertion order,
// fully determined by the owning architecture).
class ParameterVector {
public:
    // Returned reference is invalidated by the next add().
    Tensor& add(std::string name, Tensor init);

    size_t size() const { return tensors_.size(); }
    int64_t total_count() const;

    Tensor& tensor(size_t i) { return tensors_[i]; }
    const Tensor& tensor(size_t i) const { return tensors_[i]; }
    const std::string& name(size_t i) const { return names_[i]; }

    // FNV-1a over the little-endian byte image of all parameter values in
    // iteration order. Frozen subnetworks must keep this stable for the rest
    // of a run.
    uint64_t checksum() const;

    void clear_grads();

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

} // namespace adanas
