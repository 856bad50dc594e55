#include "adanas/subnetwork.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "adanas/errors.hpp"
#include "adanas/hash.hpp"
#include "adanas/rng.hpp"

namespace adanas {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'D', 'N', 'S', 'C', 'K', 'P', 'T'};
constexpr uint8_t kCheckpointVersion = 1;
constexpr int kKernel = 3;  // fixed 3x3 kernels for stem and cells

struct LayerDims {
    std::string name;
    std::vector<int> weight_shape;
    int fan_in;
    int bias_len;
};

// The full layer list for an architecture; parameter iteration order is this
// order, weight before bias.
std::vector<LayerDims> layer_plan(const ArchSpec& arch, const TaskShape& task) {
    arch.validate();
    task.validate();
    std::vector<LayerDims> plan;
    const int w = arch.width;
    if (task.is_image()) {
        const int in_c = task.input_dims[2];
        plan.push_back({"stem", {kKernel, kKernel, in_c, w}, kKernel * kKernel * in_c, w});
        for (int d = 1; d <= arch.depth; ++d) {
            plan.push_back({"cell" + std::to_string(d), {kKernel, kKernel, w, w},
                            kKernel * kKernel * w, w});
        }
    } else {
        const int in_f = task.input_dims[0];
        plan.push_back({"stem", {in_f, w}, in_f, w});
        for (int d = 1; d <= arch.depth; ++d) {
            plan.push_back({"cell" + std::to_string(d), {w, w}, w, w});
        }
    }
    plan.push_back({"head", {w, task.num_classes}, w, task.num_classes});
    return plan;
}

Subnetwork make_structure(const ArchSpec& arch, const TaskShape& task) {
    Subnetwork net;
    net.arch = arch;
    net.task = task;
    for (const auto& layer : layer_plan(arch, task)) {
        net.params.add(layer.name + ".weight", Tensor::zeros(layer.weight_shape));
        net.params.add(layer.name + ".bias", Tensor::zeros({layer.bias_len}));
    }
    return net;
}

void check_batch_shape(const Subnetwork& net, const Tensor& batch) {
    const auto& dims = net.task.input_dims;
    bool ok = batch.rank() == static_cast<int>(dims.size()) + 1 && batch.shape[0] >= 1;
    for (size_t i = 0; ok && i < dims.size(); ++i) {
        ok = batch.shape[i + 1] == dims[i];
    }
    if (!ok) {
        throw ShapeError("subnetwork_logits: batch shape " + shape_str(batch.shape) +
                         " does not match task input " + shape_str(dims));
    }
}

void write_u32_le(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64_le(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32_le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint " + path);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t read_u64_le(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint " + path);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

int64_t param_count(const ArchSpec& arch, const TaskShape& task) {
    int64_t n = 0;
    for (const auto& layer : layer_plan(arch, task)) {
        n += shape_numel(layer.weight_shape) + layer.bias_len;
    }
    return n;
}

Subnetwork build_subnetwork(const ArchSpec& arch, const TaskShape& task, uint64_t seed) {
    Subnetwork net = make_structure(arch, task);
    SplitRng root(seed);
    const auto plan = layer_plan(arch, task);
    for (size_t li = 0; li < plan.size(); ++li) {
        // Per-layer stream keyed by name, so init is independent of layer count.
        SplitRng stream = root.split(plan[li].name);
        Tensor& weight = net.params.tensor(2 * li);
        const double bound = std::sqrt(6.0 / plan[li].fan_in);
        for (double& v : weight.data) v = stream.uniform(-bound, bound);
        // Biases stay zero.
    }
    return net;
}

Tape::ValueId subnetwork_logits(Tape& tape, const Subnetwork& net, const Tensor& batch) {
    check_batch_shape(net, batch);
    auto lift = [&](const Tensor& t) {
        // Frozen parameters enter as constants; the tape never reaches them.
        // Unfrozen nets are always owned non-const by their trainer, so the
        // cast only ever unconsts a reference, never a const object.
        return net.frozen ? tape.input(t) : tape.param(const_cast<Tensor&>(t));
    };

    Tape::ValueId h = tape.input(batch);
    const size_t n_layers = net.params.size() / 2;
    if (net.task.is_image()) {
        for (size_t li = 0; li + 1 < n_layers; ++li) {
            h = tape.conv2d(h, lift(net.params.tensor(2 * li)), lift(net.params.tensor(2 * li + 1)));
            h = tape.relu(h);
        }
        h = tape.global_average_pool(h);
    } else {
        for (size_t li = 0; li + 1 < n_layers; ++li) {
            h = tape.affine(h, lift(net.params.tensor(2 * li)), lift(net.params.tensor(2 * li + 1)));
            h = tape.relu(h);
        }
    }
    const size_t head = n_layers - 1;
    return tape.affine(h, lift(net.params.tensor(2 * head)), lift(net.params.tensor(2 * head + 1)));
}

Tensor eager_logits(const Subnetwork& net, const Tensor& batch) {
    // Same kernels as the tape path, on a throwaway tape. All parameters enter
    // as constants so live nets are not registered as trainable leaves.
    check_batch_shape(net, batch);
    Tape tape;
    Tape::ValueId h = tape.input(batch);
    const size_t n_layers = net.params.size() / 2;
    if (net.task.is_image()) {
        for (size_t li = 0; li + 1 < n_layers; ++li) {
            h = tape.conv2d(h, tape.input(net.params.tensor(2 * li)),
                            tape.input(net.params.tensor(2 * li + 1)));
            h = tape.relu(h);
        }
        h = tape.global_average_pool(h);
    } else {
        for (size_t li = 0; li + 1 < n_layers; ++li) {
            h = tape.affine(h, tape.input(net.params.tensor(2 * li)),
                            tape.input(net.params.tensor(2 * li + 1)));
            h = tape.relu(h);
        }
    }
    const size_t head = n_layers - 1;
    h = tape.affine(h, tape.input(net.params.tensor(2 * head)),
                    tape.input(net.params.tensor(2 * head + 1)));
    return tape.value(h);
}

void save_checkpoint(const Subnetwork& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    os.put(static_cast<char>(kCheckpointVersion));
    write_u32_le(os, static_cast<uint32_t>(net.arch.depth));
    write_u32_le(os, static_cast<uint32_t>(net.arch.width));
    write_u32_le(os, static_cast<uint32_t>(net.iteration_born));
    write_u64_le(os, static_cast<uint64_t>(net.params.total_count()));
    write_u64_le(os, net.checksum());
    for (size_t i = 0; i < net.params.size(); ++i) {
        for (double v : net.params.tensor(i).data) {
            uint64_t bits = 0;
            std::memcpy(&bits, &v, sizeof(bits));
            write_u64_le(os, bits);
        }
    }
    if (!os) throw IoError("failed writing checkpoint " + path);
}

Subnetwork load_checkpoint(const std::string& path, const TaskShape& task) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw IoError("bad checkpoint magic in " + path);
    }
    const int version = is.get();
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
    }
    ArchSpec arch;
    arch.depth = static_cast<int>(read_u32_le(is, path));
    arch.width = static_cast<int>(read_u32_le(is, path));
    const int iteration_born = static_cast<int>(read_u32_le(is, path));
    const auto count = static_cast<int64_t>(read_u64_le(is, path));
    const uint64_t stored_checksum = read_u64_le(is, path);

    if (count != param_count(arch, task)) {
        throw IoError("checkpoint " + path + " holds " + std::to_string(count) +
                      " parameters but " + arch.str() + " on this task needs " +
                      std::to_string(param_count(arch, task)));
    }
    Subnetwork net = make_structure(arch, task);
    net.iteration_born = iteration_born;
    for (size_t i = 0; i < net.params.size(); ++i) {
        for (double& v : net.params.tensor(i).data) {
            const uint64_t bits = read_u64_le(is, path);
            std::memcpy(&v, &bits, sizeof(v));
        }
    }
    if (net.checksum() != stored_checksum) {
        throw IoError("checkpoint " + path + " checksum mismatch: stored " +
                      hex_u64(stored_checksum) + ", payload " + hex_u64(net.checksum()));
    }
    net.frozen = true;
    return net;
}

} // namespace adanas
