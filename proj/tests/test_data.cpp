#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "adanas/data.hpp"
#include "adanas/errors.hpp"
#include "testutil.hpp"

using namespace adanas;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / "adanas_data_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const fs::path& dir, const char* name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p.string();
}

// [h,h,c] image with pixel (y,x,ch) = y*100 + x*10 + ch, for geometry checks.
Tensor coord_image(int h, int c = 1) {
    Tensor img = Tensor::zeros({h, h, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < h; ++x)
            for (int ch = 0; ch < c; ++ch)
                img.data[(static_cast<size_t>(y) * h + x) * c + ch] = y * 100 + x * 10 + ch;
    return img;
}

} // namespace

TEST_CASE("csv rows parse label-first") {
    const fs::path dir = fresh_dir("csv");
    const std::string path =
        write_file(dir, "basic.csv", "0,1.5,-2\n1,0.25,3\n2,1,1\n0,0,0\n");
    Tensor x;
    std::vector<int> y;
    load_csv(path, 3, x, y);
    CHECK(x.shape == std::vector<int>{4, 2});
    CHECK(y == std::vector<int>{0, 1, 2, 0});
    CHECK(x.data == std::vector<double>{1.5, -2.0, 0.25, 3.0, 1.0, 1.0, 0.0, 0.0});
}

TEST_CASE("csv header, blank lines, and whitespace are tolerated") {
    const fs::path dir = fresh_dir("csv_forms");
    Tensor x;
    std::vector<int> y;

    load_csv(write_file(dir, "header.csv", "label,x,y\n0,1,2\n1,3,4\n"), 2, x, y);
    CHECK(y == std::vector<int>{0, 1});

    load_csv(write_file(dir, "blank.csv", "0,1,2\n\n1,3,4\n"), 2, x, y);
    CHECK(y == std::vector<int>{0, 1});

    load_csv(write_file(dir, "crlf.csv", "0,1,2\r\n1,3,4\r\n"), 2, x, y);
    CHECK(x.data == std::vector<double>{1.0, 2.0, 3.0, 4.0});

    load_csv(write_file(dir, "spaces.csv", " 0 , 1.5 , 2 \n1,3,4\n"), 2, x, y);
    CHECK(x.data[0] == 1.5);
}

TEST_CASE("csv errors name the offending line") {
    const fs::path dir = fresh_dir("csv_errors");
    Tensor x;
    std::vector<int> y;
    // A non-numeric label is only a header on the first line.
    CHECK_THROWS_WITH_AS(
        load_csv(write_file(dir, "midheader.csv", "0,1,2\nlabel,x,y\n"), 2, x, y),
        doctest::Contains("line 2"), IoError);
    CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "badnum.csv", "0,1.5,abc\n"), 2, x, y),
                         doctest::Contains("abc"), IoError);
    CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "range.csv", "0,1,2\n3,1,2\n"), 3, x, y),
                         doctest::Contains("line 2"), IoError);
    CHECK_THROWS_AS(load_csv(write_file(dir, "neg.csv", "-1,1,2\n"), 3, x, y), IoError);
    CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "ragged.csv", "0,1,2\n1,5\n"), 2, x, y),
                         doctest::Contains("expected 2"), IoError);
    CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "nofeat.csv", "0\n"), 2, x, y),
                         doctest::Contains("no feature columns"), IoError);
    CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "empty.csv", ""), 2, x, y),
                         doctest::Contains("no data rows"), IoError);
    CHECK_THROWS_WITH_AS(load_csv(write_file(dir, "only_header.csv", "label,x\n"), 2, x, y),
                         doctest::Contains("no data rows"), IoError);
    CHECK_THROWS_AS(load_csv((dir / "missing.csv").string(), 2, x, y), IoError);
}

TEST_CASE("image batches round-trip exactly on 1/255 grids") {
    const fs::path dir = fresh_dir("imgbatch");
    Tensor src = Tensor::zeros({3, 4, 4, 2});
    for (size_t i = 0; i < src.data.size(); ++i) src.data[i] = (i % 256) / 255.0;
    const std::vector<int> labels{0, 2, 1};
    const std::string path = (dir / "batch.bin").string();
    save_image_batch(path, src, labels, 3);

    Tensor back;
    std::vector<int> back_labels;
    TaskShape task;
    load_image_batch(path, back, back_labels, task);
    CHECK(task.input_dims == std::vector<int>{4, 4, 2});
    CHECK(task.num_classes == 3);
    CHECK(back_labels == labels);
    CHECK(back.data == src.data);
}

TEST_CASE("image batch loading rejects damaged files") {
    const fs::path dir = fresh_dir("imgbad");
    Tensor src = Tensor::zeros({2, 2, 2, 1});
    const std::string path = (dir / "batch.bin").string();
    save_image_batch(path, src, {0, 1}, 2);
    Tensor x;
    std::vector<int> y;
    TaskShape task;

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('Z');
        f.close();
        CHECK_THROWS_WITH_AS(load_image_batch(path, x, y, task), doctest::Contains("magic"),
                             IoError);
    }
    SUBCASE("truncation") {
        fs::resize_file(path, fs::file_size(path) - 3);
        CHECK_THROWS_WITH_AS(load_image_batch(path, x, y, task), doctest::Contains("truncated"),
                             IoError);
    }
    SUBCASE("non-image tensor refuses to save") {
        CHECK_THROWS_AS(save_image_batch(path, Tensor::zeros({2, 4}), {0, 1}, 2), ShapeError);
    }
}

TEST_CASE("synthetic tasks are deterministic in the seed") {
    const Dataset a = synthetic_task(SyntheticKind::SPIRALS, 30, 12, 3, 0.1, 7);
    const Dataset b = synthetic_task(SyntheticKind::SPIRALS, 30, 12, 3, 0.1, 7);
    const Dataset c = synthetic_task(SyntheticKind::SPIRALS, 30, 12, 3, 0.1, 8);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.content_hash() != c.content_hash());
    CHECK(a.train_features.data == b.train_features.data);
    // Train and test come from independent streams.
    CHECK(a.train_features.data[0] != a.test_features.data[0]);
}

TEST_CASE("synthetic splits are class-balanced and well-shaped") {
    const Dataset ds = synthetic_task(SyntheticKind::GAUSSIANS, 31, 10, 3, 0.2, 1);
    CHECK(ds.task.input_dims == std::vector<int>{2});
    CHECK(ds.task.num_classes == 3);
    CHECK(ds.train_features.shape == std::vector<int>{31, 2});
    CHECK(ds.train_size() == 31);
    CHECK(ds.test_size() == 10);
    int counts[3] = {0, 0, 0};
    for (int l : ds.train_labels) ++counts[l];
    CHECK(counts[0] == 11); // 31 = 11 + 10 + 10, round-robin
    CHECK(counts[1] == 10);
    CHECK(counts[2] == 10);
}

TEST_CASE("noise-free geometry puts points on their class loci") {
    SUBCASE("gaussian means sit on the radius-2 circle") {
        const Dataset ds = synthetic_task(SyntheticKind::GAUSSIANS, 8, 4, 4, 0.0, 3);
        for (int k = 0; k < ds.train_size(); ++k) {
            const double x = ds.train_features.data[2 * k];
            const double y = ds.train_features.data[2 * k + 1];
            CHECK(std::hypot(x, y) == doctest::Approx(2.0).epsilon(1e-12));
            const double phi = 2.0 * std::acos(-1.0) * ds.train_labels[k] / 4.0;
            CHECK(x == doctest::Approx(2.0 * std::cos(phi)).epsilon(1e-9));
            CHECK(y == doctest::Approx(2.0 * std::sin(phi)).epsilon(1e-9));
        }
    }
    SUBCASE("spiral arms live in the radial band [0.15, 2.2]") {
        const Dataset ds = synthetic_task(SyntheticKind::SPIRALS, 60, 12, 3, 0.0, 3);
        for (int k = 0; k < ds.train_size(); ++k) {
            const double x = ds.train_features.data[2 * k];
            const double y = ds.train_features.data[2 * k + 1];
            const double r = std::hypot(x, y);
            CHECK(r >= 0.15);
            CHECK(r <= 2.2);
            // Noise-free points satisfy the arm equation: the angle is
            // 2*pi*(1.75*t + c/3) where t places r in the radial band.
            const double t = (r - 0.15) / (2.2 - 0.15);
            const double phi =
                2.0 * std::acos(-1.0) * (1.75 * t + ds.train_labels[k] / 3.0);
            CHECK(x == doctest::Approx(r * std::cos(phi)).epsilon(1e-9));
            CHECK(y == doctest::Approx(r * std::sin(phi)).epsilon(1e-9));
        }
    }
}

TEST_CASE("synthetic parameter validation") {
    CHECK_THROWS_AS(synthetic_task(SyntheticKind::SPIRALS, 30, 10, 1, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(synthetic_task(SyntheticKind::SPIRALS, 2, 10, 3, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(synthetic_task(SyntheticKind::SPIRALS, 30, 10, 3, -0.1, 1), ConfigError);
    CHECK_THROWS_AS(parse_synthetic_kind("moons"), ConfigError);
    CHECK(parse_synthetic_kind("spirals") == SyntheticKind::SPIRALS);
    CHECK(parse_synthetic_kind("gaussians") == SyntheticKind::GAUSSIANS);
}

TEST_CASE("padding centers the image in a zero canvas") {
    const Tensor img = coord_image(2);
    const Tensor padded = pad_center(img, 4);
    CHECK(padded.shape == std::vector<int>{4, 4, 1});
    // Original pixel (0,0) lands at (1,1).
    CHECK(padded.data[4 * 1 + 1] == 0.0 * 100 + 0.0); // placed value is 0
    CHECK(padded.data[4 * 1 + 2] == 10.0);            // (0,1) -> (1,2)
    CHECK(padded.data[4 * 2 + 1] == 100.0);           // (1,0) -> (2,1)
    CHECK(padded.data[4 * 2 + 2] == 110.0);
    double border = 0.0;
    for (int i : {0, 1, 2, 3, 4, 7, 8, 11, 12, 13, 14, 15}) border += std::fabs(padded.data[i]);
    CHECK(border == 0.0);
    // Odd slack rounds the top-left offset down.
    const Tensor odd = pad_center(coord_image(3), 4);
    CHECK(odd.data[0] == 0.0 * 100 + 0.0);
    CHECK(odd.data[1] == 10.0);
    CHECK_THROWS_AS(pad_center(coord_image(4), 3), ShapeError);
    CHECK_THROWS_AS(pad_center(Tensor::zeros({2, 2}), 4), ShapeError);
}

TEST_CASE("cropping extracts the exact window") {
    const Tensor img = coord_image(4);
    const Tensor window = crop(img, 1, 2, 2);
    CHECK(window.shape == std::vector<int>{2, 2, 1});
    CHECK(window.data == std::vector<double>{120.0, 130.0, 220.0, 230.0});
    // Identity crop.
    CHECK(crop(img, 0, 0, 4).data == img.data);
    CHECK_THROWS_AS(crop(img, 3, 0, 2), ShapeError);
    CHECK_THROWS_AS(crop(img, -1, 0, 2), ShapeError);
}

TEST_CASE("horizontal flip is an involution that mirrors columns") {
    const Tensor img = coord_image(3, 2);
    const Tensor flipped = hflip(img);
    // Pixel (y, x, ch) moves to (y, W-1-x, ch).
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
            for (int ch = 0; ch < 2; ++ch)
                CHECK(flipped.data[(static_cast<size_t>(y) * 3 + (2 - x)) * 2 + ch] ==
                      img.data[(static_cast<size_t>(y) * 3 + x) * 2 + ch]);
    CHECK(hflip(flipped).data == img.data);
}

TEST_CASE("whitening zero-centers and unit-scales non-degenerate images") {
    SplitRng rng(17);
    Tensor img = adanas::test::random_tensor({4, 4, 2}, rng, 0.0, 1.0);
    whiten_inplace(img);
    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= static_cast<double>(img.data.size());
    CHECK(std::fabs(mean) < 1e-12);
    double var = 0.0;
    for (double v : img.data) var += v * v;
    var /= static_cast<double>(img.data.size());
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));

    // A constant image maps to (near-)zeros instead of dividing by zero: the
    // std floor bounds amplification, leaving only summation roundoff.
    Tensor flat = Tensor::full({4, 4, 2}, 0.7);
    whiten_inplace(flat);
    for (double v : flat.data) {
        CHECK(std::isfinite(v));
        CHECK(std::fabs(v) < 1e-12);
    }
}

TEST_CASE("cutout zeroes a clipped square window") {
    Tensor img = Tensor::full({4, 4, 1}, 1.0);
    cutout_inplace(img, 1, 1, 2); // rows 0..1, cols 0..1
    double total = 0.0;
    for (double v : img.data) total += v;
    CHECK(total == 12.0);
    CHECK(img.data[0] == 0.0);
    CHECK(img.data[1] == 0.0);
    CHECK(img.data[4] == 0.0);
    CHECK(img.data[5] == 0.0);

    // Clipped at the border.
    Tensor edge = Tensor::full({4, 4, 1}, 1.0);
    cutout_inplace(edge, 0, 0, 2);
    double edge_total = 0.0;
    for (double v : edge.data) edge_total += v;
    CHECK(edge_total == 15.0);

    // A window as large as the image erases it entirely.
    Tensor all = Tensor::full({4, 4, 1}, 1.0);
    cutout_inplace(all, 2, 2, 4);
    for (double v : all.data) CHECK(v == 0.0);

    Tensor keep = Tensor::full({4, 4, 1}, 1.0);
    cutout_inplace(keep, 2, 2, 0);
    for (double v : keep.data) CHECK(v == 1.0);
}

TEST_CASE("the augment chain reduces to identity when every stage is off") {
    AugmentConfig cfg;
    cfg.pad_to = 3; // no slack
    cfg.crop_to = 3;
    cfg.flip = false;
    cfg.whiten = false;
    cfg.cutout_size = 0;
    const Tensor img = coord_image(3);
    SplitRng rng(1);
    CHECK(augment(img, cfg, rng).data == img.data);
}

TEST_CASE("augmentation is deterministic in the stream state") {
    AugmentConfig cfg;
    cfg.pad_to = 6;
    cfg.crop_to = 4;
    cfg.cutout_size = 2;
    const Tensor img = coord_image(4, 2);
    SplitRng a(9);
    SplitRng b(9);
    for (int i = 0; i < 5; ++i) {
        CHECK(augment(img, cfg, a).data == augment(img, cfg, b).data);
    }
    // Flat examples pass through untouched.
    SplitRng c(9);
    const Tensor flat({3}, {1.0, 2.0, 3.0});
    CHECK(augment(flat, cfg, c).data == flat.data);
}

TEST_CASE("eval transform whitens images, passes flat rows, and is idempotent") {
    AugmentConfig cfg;
    const Tensor flat({3}, {1.0, 2.0, 3.0});
    CHECK(eval_transform(flat, cfg).data == flat.data);

    SplitRng rng(23);
    const Tensor img = adanas::test::random_tensor({4, 4, 2}, rng, 0.0, 1.0);
    const Tensor once = eval_transform(img, cfg);
    const Tensor twice = eval_transform(once, cfg);
    for (size_t i = 0; i < once.data.size(); ++i) {
        CHECK(twice.data[i] == doctest::Approx(once.data[i]).epsilon(1e-9));
    }

    AugmentConfig off;
    off.whiten = false;
    CHECK(eval_transform(img, off).data == img.data);
}

TEST_CASE("eval features whiten each example independently") {
    SplitRng rng(29);
    const TaskShape task{{3, 3, 1}, 2};
    const Tensor batch = adanas::test::random_tensor({4, 3, 3, 1}, rng, 0.0, 1.0);
    AugmentConfig cfg;
    cfg.pad_to = 5;
    cfg.crop_to = 3;
    const Tensor out = eval_features(batch, task, cfg);
    CHECK(out.shape == batch.shape);
    for (int i = 0; i < 4; ++i) {
        Tensor img = Tensor::zeros({3, 3, 1});
        std::copy_n(batch.data.data() + i * 9, 9, img.data.data());
        whiten_inplace(img);
        for (int j = 0; j < 9; ++j) CHECK(out.data[i * 9 + j] == img.data[j]);
    }
    // Flat tasks pass through.
    const Tensor rows = Tensor::zeros({4, 2});
    CHECK(eval_features(rows, TaskShape{{2}, 2}, cfg).data == rows.data);
}

TEST_CASE("augment config validation binds crop size to the task") {
    AugmentConfig cfg; // pad 40, crop 32
    CHECK_NOTHROW(cfg.validate(TaskShape{{2}, 3})); // flat: nothing to check
    CHECK_NOTHROW(cfg.validate(TaskShape{{32, 32, 3}, 10}));
    CHECK_THROWS_WITH_AS(cfg.validate(TaskShape{{28, 28, 1}, 10}),
                         doctest::Contains("crop_to"), ConfigError);
    cfg.pad_to = 16;
    CHECK_THROWS_AS(cfg.validate(TaskShape{{32, 32, 3}, 10}), ConfigError);
    cfg.pad_to = 40;
    cfg.cutout_size = -1;
    CHECK_THROWS_AS(cfg.validate(TaskShape{{32, 32, 3}, 10}), ConfigError);
}

TEST_CASE("the train stream partitions each epoch exactly") {
    // Feature row k holds the value k so batches reveal their source rows.
    const int m = 10;
    Tensor features = Tensor::zeros({m, 1});
    for (int i = 0; i < m; ++i) features.data[i] = i;
    const std::vector<int> labels(m, 0);
    const TaskShape task{{1}, 2};
    AugmentConfig cfg;

    TrainStream stream(features, labels, task, cfg, 3, SplitRng(11));
    CHECK(stream.epoch() == 0);
    std::multiset<double> seen;
    std::vector<int> sizes;
    Tensor bx;
    std::vector<int> by;
    while (stream.epoch() == 0) {
        stream.next_batch(bx, by);
        sizes.push_back(bx.shape[0]);
        for (int r = 0; r < bx.shape[0]; ++r) seen.insert(bx.data[r]);
    }
    CHECK(sizes == std::vector<int>{3, 3, 3, 1});
    CHECK(seen.size() == 10);
    std::multiset<double> expect;
    for (int i = 0; i < m; ++i) expect.insert(i);
    CHECK(seen == expect);

    // The next epoch revisits all rows in a different order.
    std::vector<double> second;
    while (stream.epoch() == 1) {
        stream.next_batch(bx, by);
        for (int r = 0; r < bx.shape[0]; ++r) second.push_back(bx.data[r]);
    }
    CHECK(second.size() == 10);
    CHECK(std::multiset<double>(second.begin(), second.end()) == expect);
}

TEST_CASE("train streams replay exactly for equal seeds") {
    SplitRng data_rng(13);
    const Tensor features = adanas::test::random_tensor({7, 2}, data_rng);
    std::vector<int> labels(7);
    for (int i = 0; i < 7; ++i) labels[i] = i % 3;
    const TaskShape task{{2}, 3};
    AugmentConfig cfg;

    TrainStream a(features, labels, task, cfg, 2, SplitRng(5));
    TrainStream b(features, labels, task, cfg, 2, SplitRng(5));
    Tensor xa, xb;
    std::vector<int> ya, yb;
    for (int i = 0; i < 12; ++i) {
        a.next_batch(xa, ya);
        b.next_batch(xb, yb);
        CHECK(xa.data == xb.data);
        CHECK(ya == yb);
    }
    // Labels ride along with their rows.
    TrainStream c(features, labels, task, cfg, 3, SplitRng(6));
    Tensor xc;
    std::vector<int> yc;
    c.next_batch(xc, yc);
    for (int r = 0; r < xc.shape[0]; ++r) {
        // Find the source row by value and confirm the label matches.
        for (int s = 0; s < 7; ++s) {
            if (features.data[2 * s] == xc.data[2 * r]) CHECK(yc[r] == labels[s]);
        }
    }
}

TEST_CASE("image train streams whiten and stay in shape") {
    SplitRng data_rng(19);
    const Tensor features = adanas::test::random_tensor({5, 3, 3, 1}, data_rng, 0.0, 1.0);
    const std::vector<int> labels{0, 1, 0, 1, 0};
    const TaskShape task{{3, 3, 1}, 2};
    AugmentConfig cfg;
    cfg.pad_to = 3; // no slack: crop is the identity
    cfg.crop_to = 3;
    cfg.flip = false;
    cfg.cutout_size = 0;

    TrainStream stream(features, labels, task, cfg, 5, SplitRng(2));
    Tensor bx;
    std::vector<int> by;
    stream.next_batch(bx, by);
    CHECK(bx.shape == std::vector<int>{5, 3, 3, 1});
    // With only whitening active, each batch row is its whitened source row.
    for (int r = 0; r < 5; ++r) {
        double mean = 0.0;
        for (int j = 0; j < 9; ++j) mean += bx.data[r * 9 + j];
        CHECK(std::fabs(mean / 9.0) < 1e-12);
    }
}

TEST_CASE("train stream constructor validation") {
    const Tensor features = Tensor::zeros({4, 2});
    const std::vector<int> labels{0, 1, 0, 1};
    const TaskShape task{{2}, 2};
    AugmentConfig cfg;
    CHECK_THROWS_AS(TrainStream(features, labels, task, cfg, 0, SplitRng(1)), ConfigError);
    const std::vector<int> short_labels{0, 1};
    CHECK_THROWS_AS(TrainStream(features, short_labels, task, cfg, 2, SplitRng(1)), ShapeError);
}
