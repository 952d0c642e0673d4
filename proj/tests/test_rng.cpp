#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shapley/rng.hpp"

using shapley::RngStream;

TEST_CASE("same seed reproduces the sequence") {
    RngStream a(42);
    RngStream b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds and children diverge") {
    RngStream a(1);
    RngStream b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i) equal += a.next_u64() == b.next_u64();
    REQUIRE(equal == 0);

    RngStream root(7);
    RngStream c0 = root.child(0);
    RngStream c1 = root.child(1);
    REQUIRE(c0.key() != c1.key());
    REQUIRE(c0.next_u64() != c1.next_u64());
    // children are a pure function of (parent, index)
    REQUIRE(root.child(0).next_u64() == root.child(0).next_u64());
}

TEST_CASE("drawing from a parent does not disturb its children") {
    RngStream root(99);
    const auto before = root.child(3).next_u64();
    root.next_u64();
    root.next_u64();
    REQUIRE(root.child(3).next_u64() == before);
}

TEST_CASE("uniform range and moments") {
    RngStream rng(2024);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.next_uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    REQUIRE(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal moments") {
    RngStream rng(555);
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("next_below stays in range and is roughly uniform") {
    RngStream rng(31337);
    std::vector<int> hits(10, 0);
    for (int i = 0; i < 100000; ++i) {
        const auto v = rng.next_below(10);
        REQUIRE(v < 10);
        ++hits[static_cast<std::size_t>(v)];
    }
    for (int h : hits) REQUIRE(std::abs(h - 10000) < 500);
}
