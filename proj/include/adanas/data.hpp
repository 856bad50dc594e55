#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adanas/arch.hpp"
#include "adanas/rng.hpp"
#include "adanas/tensor.hpp"

namespace adanas {

// In-memory dataset: train and test splits plus the task shape. Feature
// tensors are [m, F] for flat tasks and [m, H, W, C] for image tasks.
struct Dataset {
    std::string name;
    TaskShape task;
    Tensor train_features;
    std::vector<int> train_labels;
    Tensor test_features;
    std::vector<int> test_labels;

    int train_size() const { return train_features.shape.empty() ? 0 : train_features.shape[0]; }
    int test_size() const { return test_features.shape.empty() ? 0 : test_features.shape[0]; }

    // Content fingerprint over task shape, features, and labels of both
    // splits; reports refuse to mix runs with different fingerprints.
    uint64_t content_hash() const;
};

// CSV rows are label-first: "label,x1,x2,...". A non-numeric first line is
// treated as a header and skipped. Labels must lie in [0, num_classes);
// violations name the offending row. Returns features [m, F] plus labels.
void load_csv(const std::string& path, int num_classes, Tensor& features,
              std::vector<int>& labels);

// Binary image batch: 8-byte magic "ADNSIMG1", five u32 little-endian header
// fields (count, height, width, channels, num_classes), then count records of
// one u8 label followed by height*width*channels u8 pixels (row-major HWC).
// Pixels load as value/255.
void load_image_batch(const std::string& path, Tensor& features, std::vector<int>& labels,
                      TaskShape& task);
void save_image_batch(const std::string& path, const Tensor& features,
                      const std::vector<int>& labels, int num_classes);

enum class SyntheticKind { SPIRALS, GAUSSIANS };

SyntheticKind parse_synthetic_kind(const std::string& s);

// Deterministic synthetic 2-feature tasks, class-balanced to within one
// example. Spirals: interleaved arcs with Gaussian coordinate jitter of the
// given noise. Gaussians: class means on a circle, isotropic noise.
Dataset synthetic_task(SyntheticKind kind, int m_train, int m_test, int classes,
                       double noise, uint64_t seed);

// Training-time augmentation for image tasks. The chain is: zero-pad to
// pad_to (centered), random crop back to crop_to, random horizontal flip,
// per-image whitening, then cutout (masked to zero, after whitening).
// crop_to must equal the raw image side so train and eval shapes agree.
struct AugmentConfig {
    int pad_to = 40;
    int crop_to = 32;
    bool flip = true;
    bool whiten = true;
    int cutout_size = 16;

    void validate(const TaskShape& task) const;
};

// Pipeline stages, exposed individually for direct testing. All take one
// image [H, W, C].
Tensor pad_center(const Tensor& img, int pad_to);
Tensor crop(const Tensor& img, int top, int left, int crop_to);
Tensor hflip(const Tensor& img);
void whiten_inplace(Tensor& img);
void cutout_inplace(Tensor& img, int center_y, int center_x, int size);

// Full train-mode chain; draws crop offsets, the flip coin, and the cutout
// center from rng in that fixed order.
Tensor augment(const Tensor& img, const AugmentConfig& cfg, SplitRng& rng);
// Eval mode: whitening only, no randomness; idempotent on its own output
// shape. Flat inputs pass through unchanged in both modes.
Tensor eval_transform(const Tensor& img, const AugmentConfig& cfg);

// Applies eval_transform per example and reassembles the split tensor.
Tensor eval_features(const Tensor& features, const TaskShape& task, const AugmentConfig& cfg);

// Epoch-shuffled mini-batch stream over the training split. Each epoch
// reshuffles; the final batch of an epoch may be short. Image examples are
// augmented per draw with fresh randomness.
class TrainStream {
  public:
    TrainStream(const Tensor& features, const std::vector<int>& labels, const TaskShape& task,
                const AugmentConfig& cfg, int batch_size, SplitRng stream);

    // Fills the next batch; batch_features is [b, ...dims] with b in
    // [1, batch_size].
    void next_batch(Tensor& batch_features, std::vector<int>& batch_labels);

    int epoch() const { return epoch_; }

  private:
    const Tensor& features_;
    const std::vector<int>& labels_;
    TaskShape task_;
    AugmentConfig cfg_;
    int batch_size_;
    SplitRng rng_;
    std::vector<int> order_;
    size_t cursor_ = 0;
    int epoch_ = 0;

    void reshuffle();
};

} // namespace adanas
