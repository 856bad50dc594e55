#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "adanas/errors.hpp"
#include "adanas/hash.hpp"
#include "adanas/rng.hpp"
#include "adanas/tensor.hpp"

using namespace adanas;

TEST_CASE("tensor construction validates shape against payload") {
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor({2, 3}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({0, 3}, {}), ShapeError);
    CHECK(Tensor::zeros({4}).data == std::vector<double>(4, 0.0));
    CHECK(Tensor::full({2}, 1.5).data == std::vector<double>{1.5, 1.5});
    CHECK(Tensor::scalar(2.0).is_scalar());
    CHECK(shape_str({2, 3}) == "[2,3]");
}

TEST_CASE("ensure_finite names the failing site") {
    CHECK_NOTHROW(ensure_finite({1.0, -2.0}, "ok"));
    CHECK_THROWS_WITH_AS(ensure_finite({1.0, std::nan("")}, "stem forward"),
                         doctest::Contains("stem forward"), NumericError);
    CHECK_THROWS_AS(ensure_finite({INFINITY}, "x"), NumericError);
}

TEST_CASE("fnv1a matches published 64-bit vectors") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("f64 hashing runs over the little-endian byte image") {
    // 1.0 is 0x3ff0000000000000: bytes 00..00 f0 3f little-endian.
    const unsigned char bytes[8] = {0, 0, 0, 0, 0, 0, 0xf0, 0x3f};
    CHECK(fnv1a_f64(1.0, kFnvOffsetBasis) == fnv1a(bytes, 8));
    CHECK(fnv1a_f64_span({1.0}) == fnv1a_f64(1.0, kFnvOffsetBasis));
}

TEST_CASE("hex printing round-trips") {
    CHECK(hex_u64(0xdeadbeefULL) == "0x00000000deadbeef");
    CHECK(parse_hex_u64(hex_u64(0x123456789abcdef0ULL)) == 0x123456789abcdef0ULL);
}

TEST_CASE("identical seeds give identical streams") {
    SplitRng a(42);
    SplitRng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("splitting derives independent streams without consuming state") {
    SplitRng base(7);
    SplitRng mirror(7);
    SplitRng s1 = base.split(1);
    SplitRng s2 = base.split(2);
    CHECK(s1.next_u64() != s2.next_u64());
    // base was not advanced by the splits.
    CHECK(base.next_u64() == mirror.next_u64());
    // String and integer tags address different streams.
    CHECK(base.split("init").next_u64() != base.split("data").next_u64());
}

TEST_CASE("uniform doubles stay inside their interval") {
    SplitRng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("next_index is bounded and hits every bucket") {
    SplitRng rng(11);
    std::set<uint64_t> seen;
    for (int i = 0; i < 400; ++i) {
        const uint64_t v = rng.next_index(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal samples look standard") {
    SplitRng rng(5);
    const int n = 20000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v;
    SplitRng(9).shuffle(v);
    SplitRng(9).shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
    std::vector<int> other(50);
    for (int i = 0; i < 50; ++i) other[i] = i;
    SplitRng(10).shuffle(other);
    CHECK(other != v);
}
