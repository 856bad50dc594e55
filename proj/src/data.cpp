#include "adanas/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "adanas/errors.hpp"
#include "adanas/hash.hpp"

namespace adanas {

namespace {

constexpr char kImageMagic[8] = {'A', 'D', 'N', 'S', 'I', 'M', 'G', '1'};

// Spiral arms sweep 1.75 turns from radius 0.15 to 2.2. The radial gap
// between adjacent arms is (outer - inner) / (classes * turns); at 3 classes
// that is ~0.39, so coordinate noise around 0.15 blurs the inner windings
// while the outer ones stay clean.
constexpr double kSpiralTurns = 1.75;
constexpr double kSpiralInnerRadius = 0.15;
constexpr double kSpiralOuterRadius = 2.2;

double parse_double_token(const std::string& tok, int line_no) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        throw IoError("csv line " + std::to_string(line_no) + ": bad number \"" + tok + "\"");
    }
    return v;
}

bool parse_int_token(const std::string& tok, long& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    size_t begin = 0;
    while (true) {
        const size_t comma = line.find(',', begin);
        std::string tok = line.substr(begin, comma == std::string::npos ? comma : comma - begin);
        // Trim space and CR around the token.
        const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
        while (!tok.empty() && is_space(tok.front())) tok.erase(tok.begin());
        while (!tok.empty() && is_space(tok.back())) tok.pop_back();
        out.push_back(std::move(tok));
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }
    return out;
}

void write_u32_le(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated image batch " + path);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void hash_labels(const std::vector<int>& labels, uint64_t& h) {
    for (int v : labels) {
        const auto u = static_cast<uint64_t>(static_cast<int64_t>(v));
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
        h = fnv1a(b, 8, h);
    }
}

} // namespace

uint64_t Dataset::content_hash() const {
    uint64_t h = fnv1a(name);
    std::vector<int> dims = task.input_dims;
    dims.push_back(task.num_classes);
    for (int d : dims) {
        const auto u = static_cast<uint64_t>(d);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
        h = fnv1a(b, 8, h);
    }
    h = fnv1a_f64_span(train_features.data, h);
    hash_labels(train_labels, h);
    h = fnv1a_f64_span(test_features.data, h);
    hash_labels(test_labels, h);
    return h;
}

void load_csv(const std::string& path, int num_classes, Tensor& features,
              std::vector<int>& labels) {
    if (num_classes < 2) throw ConfigError("csv loader needs num_classes >= 2");
    std::ifstream is(path);
    if (!is) throw IoError("cannot open csv file " + path);

    std::vector<double> values;
    labels.clear();
    int width = -1;
    int line_no = 0;
    std::string line;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto toks = split_csv_line(line);
        long label = 0;
        if (!parse_int_token(toks[0], label)) {
            if (labels.empty() && line_no == 1) continue;  // header row
            throw IoError("csv line " + std::to_string(line_no) + ": bad label \"" + toks[0] +
                          "\"");
        }
        if (label < 0 || label >= num_classes) {
            throw IoError("csv line " + std::to_string(line_no) + ": label " +
                          std::to_string(label) + " outside [0," + std::to_string(num_classes) +
                          ")");
        }
        const int row_width = static_cast<int>(toks.size()) - 1;
        if (row_width < 1) {
            throw IoError("csv line " + std::to_string(line_no) + ": no feature columns");
        }
        if (width == -1) {
            width = row_width;
        } else if (row_width != width) {
            throw IoError("csv line " + std::to_string(line_no) + ": " +
                          std::to_string(row_width) + " features, expected " +
                          std::to_string(width));
        }
        labels.push_back(static_cast<int>(label));
        for (size_t i = 1; i < toks.size(); ++i) {
            values.push_back(parse_double_token(toks[i], line_no));
        }
    }
    if (labels.empty()) throw IoError("csv file " + path + " contains no data rows");
    features = Tensor({static_cast<int>(labels.size()), width}, std::move(values));
}

void load_image_batch(const std::string& path, Tensor& features, std::vector<int>& labels,
                      TaskShape& task) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image batch " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kImageMagic, 8) != 0) {
        throw IoError("bad image-batch magic in " + path);
    }
    const int count = static_cast<int>(read_u32_le(is, path));
    const int h = static_cast<int>(read_u32_le(is, path));
    const int w = static_cast<int>(read_u32_le(is, path));
    const int c = static_cast<int>(read_u32_le(is, path));
    const int classes = static_cast<int>(read_u32_le(is, path));
    if (count < 1 || h < 1 || w < 1 || c < 1 || classes < 2) {
        throw IoError("image batch " + path + " header is degenerate");
    }
    task.input_dims = {h, w, c};
    task.num_classes = classes;

    const int64_t pixels = static_cast<int64_t>(h) * w * c;
    features = Tensor::zeros({count, h, w, c});
    labels.assign(count, 0);
    std::vector<unsigned char> record(static_cast<size_t>(pixels));
    for (int i = 0; i < count; ++i) {
        const int label = is.get();
        if (label == EOF) throw IoError("truncated image batch " + path);
        if (label >= classes) {
            throw IoError("image batch " + path + " record " + std::to_string(i) + ": label " +
                          std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
        }
        labels[i] = label;
        if (!is.read(reinterpret_cast<char*>(record.data()), pixels)) {
            throw IoError("truncated image batch " + path);
        }
        double* dst = features.data.data() + i * pixels;
        for (int64_t j = 0; j < pixels; ++j) dst[j] = record[j] / 255.0;
    }
}

void save_image_batch(const std::string& path, const Tensor& features,
                      const std::vector<int>& labels, int num_classes) {
    if (features.rank() != 4) {
        throw ShapeError("image batch wants [m,H,W,C] features, got " + shape_str(features.shape));
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write image batch " + path);
    os.write(kImageMagic, 8);
    write_u32_le(os, static_cast<uint32_t>(features.shape[0]));
    write_u32_le(os, static_cast<uint32_t>(features.shape[1]));
    write_u32_le(os, static_cast<uint32_t>(features.shape[2]));
    write_u32_le(os, static_cast<uint32_t>(features.shape[3]));
    write_u32_le(os, static_cast<uint32_t>(num_classes));
    const int64_t pixels = features.numel() / features.shape[0];
    for (int i = 0; i < features.shape[0]; ++i) {
        os.put(static_cast<char>(labels[i]));
        const double* src = features.data.data() + i * pixels;
        for (int64_t j = 0; j < pixels; ++j) {
            const double v = std::clamp(src[j], 0.0, 1.0) * 255.0;
            os.put(static_cast<char>(std::lround(v)));
        }
    }
    if (!os) throw IoError("failed writing image batch " + path);
}

SyntheticKind parse_synthetic_kind(const std::string& s) {
    if (s == "spirals") return SyntheticKind::SPIRALS;
    if (s == "gaussians") return SyntheticKind::GAUSSIANS;
    throw ConfigError("unknown synthetic task \"" + s + "\" (expected spirals or gaussians)");
}

Dataset synthetic_task(SyntheticKind kind, int m_train, int m_test, int classes,
                       double noise, uint64_t seed) {
    if (classes < 2) throw ConfigError("synthetic task needs at least 2 classes");
    if (m_train < classes || m_test < classes) {
        throw ConfigError("synthetic task needs at least one example per class and split");
    }
    if (noise < 0.0) throw ConfigError("synthetic noise must be nonnegative");

    const SplitRng root(seed);
    auto fill = [&](SplitRng rng, int m, Tensor& features, std::vector<int>& labels) {
        features = Tensor::zeros({m, 2});
        labels.assign(m, 0);
        for (int k = 0; k < m; ++k) {
            const int c = k % classes;
            double x = 0.0;
            double y = 0.0;
            if (kind == SyntheticKind::SPIRALS) {
                const double t = rng.next_double();
                const double r =
                    kSpiralInnerRadius + (kSpiralOuterRadius - kSpiralInnerRadius) * t;
                const double phi =
                    2.0 * std::numbers::pi * (kSpiralTurns * t + static_cast<double>(c) / classes);
                x = r * std::cos(phi);
                y = r * std::sin(phi);
            } else {
                const double phi = 2.0 * std::numbers::pi * c / classes;
                x = 2.0 * std::cos(phi);
                y = 2.0 * std::sin(phi);
            }
            x += noise * rng.normal();
            y += noise * rng.normal();
            features.data[2 * k] = x;
            features.data[2 * k + 1] = y;
            labels[k] = c;
        }
    };

    Dataset ds;
    ds.name = (kind == SyntheticKind::SPIRALS ? "spirals" : "gaussians");
    ds.task.input_dims = {2};
    ds.task.num_classes = classes;
    fill(root.split("train"), m_train, ds.train_features, ds.train_labels);
    fill(root.split("test"), m_test, ds.test_features, ds.test_labels);
    return ds;
}

void AugmentConfig::validate(const TaskShape& task) const {
    if (!task.is_image()) return;
    if (crop_to < 1 || pad_to < crop_to) {
        throw ConfigError("augmentation needs pad_to >= crop_to >= 1");
    }
    if (cutout_size < 0) throw ConfigError("cutout_size must be nonnegative");
    if (task.input_dims[0] != crop_to || task.input_dims[1] != crop_to) {
        throw ConfigError("crop_to " + std::to_string(crop_to) + " must equal the image side " +
                          std::to_string(task.input_dims[0]) + "x" +
                          std::to_string(task.input_dims[1]) +
                          " so train and eval shapes agree");
    }
}

Tensor pad_center(const Tensor& img, int pad_to) {
    if (img.rank() != 3) throw ShapeError("pad_center wants [H,W,C], got " + shape_str(img.shape));
    const int h = img.shape[0];
    const int w = img.shape[1];
    const int c = img.shape[2];
    if (pad_to < h || pad_to < w) {
        throw ShapeError("pad_center target " + std::to_string(pad_to) + " smaller than image " +
                         shape_str(img.shape));
    }
    Tensor out = Tensor::zeros({pad_to, pad_to, c});
    const int top = (pad_to - h) / 2;
    const int left = (pad_to - w) / 2;
    for (int y = 0; y < h; ++y) {
        std::copy_n(img.data.data() + static_cast<size_t>(y) * w * c, static_cast<size_t>(w) * c,
                    out.data.data() + (static_cast<size_t>(y + top) * pad_to + left) * c);
    }
    return out;
}

Tensor crop(const Tensor& img, int top, int left, int crop_to) {
    if (img.rank() != 3) throw ShapeError("crop wants [H,W,C], got " + shape_str(img.shape));
    const int h = img.shape[0];
    const int w = img.shape[1];
    const int c = img.shape[2];
    if (top < 0 || left < 0 || top + crop_to > h || left + crop_to > w) {
        throw ShapeError("crop " + std::to_string(crop_to) + " at (" + std::to_string(top) + "," +
                         std::to_string(left) + ") leaves " + shape_str(img.shape));
    }
    Tensor out = Tensor::zeros({crop_to, crop_to, c});
    for (int y = 0; y < crop_to; ++y) {
        std::copy_n(img.data.data() + (static_cast<size_t>(y + top) * w + left) * c,
                    static_cast<size_t>(crop_to) * c,
                    out.data.data() + static_cast<size_t>(y) * crop_to * c);
    }
    return out;
}

Tensor hflip(const Tensor& img) {
    if (img.rank() != 3) throw ShapeError("hflip wants [H,W,C], got " + shape_str(img.shape));
    const int h = img.shape[0];
    const int w = img.shape[1];
    const int c = img.shape[2];
    Tensor out = Tensor::zeros(img.shape);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::copy_n(img.data.data() + (static_cast<size_t>(y) * w + x) * c, c,
                        out.data.data() + (static_cast<size_t>(y) * w + (w - 1 - x)) * c);
        }
    }
    return out;
}

void whiten_inplace(Tensor& img) {
    const auto n = static_cast<double>(img.data.size());
    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : img.data) var += (v - mean) * (v - mean);
    var /= n;
    // The floor keeps constant images finite and bounds amplification.
    const double adjusted_std = std::max(std::sqrt(var), 1.0 / std::sqrt(n));
    for (double& v : img.data) v = (v - mean) / adjusted_std;
}

void cutout_inplace(Tensor& img, int center_y, int center_x, int size) {
    if (size <= 0) return;
    const int h = img.shape[0];
    const int w = img.shape[1];
    const int c = img.shape[2];
    const int y0 = std::max(0, center_y - size / 2);
    const int x0 = std::max(0, center_x - size / 2);
    const int y1 = std::min(h, center_y - size / 2 + size);
    const int x1 = std::min(w, center_x - size / 2 + size);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            std::fill_n(img.data.data() + (static_cast<size_t>(y) * w + x) * c, c, 0.0);
        }
    }
}

Tensor augment(const Tensor& img, const AugmentConfig& cfg, SplitRng& rng) {
    if (img.rank() != 3) return img;
    Tensor padded = pad_center(img, cfg.pad_to);
    const int slack = cfg.pad_to - cfg.crop_to;
    const int top = static_cast<int>(rng.next_index(slack + 1));
    const int left = static_cast<int>(rng.next_index(slack + 1));
    Tensor out = crop(padded, top, left, cfg.crop_to);
    if (cfg.flip && rng.next_double() < 0.5) {
        out = hflip(out);
    }
    if (cfg.whiten) whiten_inplace(out);
    if (cfg.cutout_size > 0) {
        const int cy = static_cast<int>(rng.next_index(cfg.crop_to));
        const int cx = static_cast<int>(rng.next_index(cfg.crop_to));
        cutout_inplace(out, cy, cx, cfg.cutout_size);
    }
    return out;
}

Tensor eval_transform(const Tensor& img, const AugmentConfig& cfg) {
    Tensor out = img;
    if (img.rank() == 3 && cfg.whiten) whiten_inplace(out);
    return out;
}

Tensor eval_features(const Tensor& features, const TaskShape& task, const AugmentConfig& cfg) {
    if (!task.is_image() || !cfg.whiten) return features;
    Tensor out = features;
    const int m = features.shape[0];
    const int64_t pixels = features.numel() / m;
    Tensor img = Tensor::zeros({task.input_dims[0], task.input_dims[1], task.input_dims[2]});
    for (int i = 0; i < m; ++i) {
        std::copy_n(features.data.data() + i * pixels, pixels, img.data.data());
        whiten_inplace(img);
        std::copy_n(img.data.data(), pixels, out.data.data() + i * pixels);
    }
    return out;
}

TrainStream::TrainStream(const Tensor& features, const std::vector<int>& labels,
                         const TaskShape& task, const AugmentConfig& cfg, int batch_size,
                         SplitRng stream)
    : features_(features),
      labels_(labels),
      task_(task),
      cfg_(cfg),
      batch_size_(batch_size),
      rng_(stream) {
    if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
    const int m = features_.shape.empty() ? 0 : features_.shape[0];
    if (m < 1) throw Error("TrainStream over an empty split");
    if (static_cast<int>(labels_.size()) != m) {
        throw ShapeError("TrainStream: " + std::to_string(m) + " rows vs " +
                         std::to_string(labels_.size()) + " labels");
    }
    cfg_.validate(task_);
    order_.resize(m);
    for (int i = 0; i < m; ++i) order_[i] = i;
    reshuffle();
}

void TrainStream::reshuffle() {
    rng_.shuffle(order_);
    cursor_ = 0;
}

void TrainStream::next_batch(Tensor& batch_features, std::vector<int>& batch_labels) {
    const auto m = order_.size();
    const int b = static_cast<int>(std::min<size_t>(batch_size_, m - cursor_));
    const int64_t row = features_.numel() / static_cast<int64_t>(m);

    std::vector<int> shape = features_.shape;
    shape[0] = b;
    batch_features = Tensor::zeros(shape);
    batch_labels.assign(b, 0);
    const bool image = task_.is_image();
    Tensor img = image ? Tensor::zeros({task_.input_dims[0], task_.input_dims[1],
                                        task_.input_dims[2]})
                       : Tensor();
    for (int r = 0; r < b; ++r) {
        const int src = order_[cursor_ + r];
        batch_labels[r] = labels_[src];
        const double* from = features_.data.data() + src * row;
        if (image) {
            std::copy_n(from, row, img.data.data());
            const Tensor aug = augment(img, cfg_, rng_);
            std::copy_n(aug.data.data(), row, batch_features.data.data() + r * row);
        } else {
            std::copy_n(from, row, batch_features.data.data() + r * row);
        }
    }
    cursor_ += b;
    if (cursor_ == m) {
        ++epoch_;
        reshuffle();
    }
}

} // namespace adanas
