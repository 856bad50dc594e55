#pragma once

#include <cstdint>
#include <string>

#include "adanas/arch.hpp"
#include "adanas/params.hpp"
#include "adanas/tape.hpp"

namespace adanas {

// One network of the ensemble family: a stem mapping the input to `width`
// channels, `depth` identical cells (conv3x3+relu for image tasks,
// affine+relu for flat tasks), global average pooling for images, and an
// affine head to the class count.
//
// Once frozen, a subnetwork's parameters never change; frozen subnetworks are
// safe to share read-only across workers.
struct Subnetwork {
    ArchSpec arch;
    TaskShape task;
    ParameterVector params;
    bool frozen = false;
    int iteration_born = 0;

    uint64_t checksum() const { return params.checksum(); }
};

// Exact trainable-scalar count of build_subnetwork(arch, task). Pure; strictly
// increasing in depth at fixed width and in width at fixed depth.
int64_t param_count(const ArchSpec& arch, const TaskShape& task);

// Realizes an architecture as an initialized, unfrozen network. He-uniform
// weights (bound sqrt(6/fan_in)) from the seeded stream; zero biases.
Subnetwork build_subnetwork(const ArchSpec& arch, const TaskShape& task, uint64_t seed);

// Pre-softmax logits [B, num_classes] recorded on the tape. Frozen networks
// contribute constants only: no gradient reaches their parameters.
Tape::ValueId subnetwork_logits(Tape& tape, const Subnetwork& net, const Tensor& batch);

// Forward pass without gradient bookkeeping exposed to the caller; used for
// frozen teachers and evaluation. Value-identical to the tape path.
Tensor eager_logits(const Subnetwork& net, const Tensor& batch);

// Checkpoint file: magic, version byte, header (arch, iteration_born,
// parameter count and checksum), then the flat little-endian f64 payload.
void save_checkpoint(const Subnetwork& net, const std::string& path);
Subnetwork load_checkpoint(const std::string& path, const TaskShape& task);

} // namespace adanas
