#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "flude/rng.hpp"

using namespace flude;

TEST_CASE("same key reproduces the same sequence") {
    RngStream a(RngStream::derive(42, "test", 7));
    RngStream b(RngStream::derive(42, "test", 7));
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams differ") {
    RngStream a(RngStream::derive(42, "test", 1));
    RngStream b(RngStream::derive(42, "test", 2));
    RngStream c(RngStream::derive(43, "test", 1));
    RngStream d(RngStream::derive(42, "other", 1));
    uint64_t va = a.next_u64();
    CHECK(va != b.next_u64());
    CHECK(va != c.next_u64());
    CHECK(va != d.next_u64());
}

TEST_CASE("next_double stays in [0,1) and is roughly uniform") {
    RngStream g(RngStream::derive(1, "uniform"));
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = g.next_double();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform respects bounds and degenerate ranges") {
    RngStream g(RngStream::derive(2, "uniform"));
    for (int i = 0; i < 1000; ++i) {
        double u = g.uniform(3.0, 9.0);
        REQUIRE(u >= 3.0);
        REQUIRE(u < 9.0);
    }
    CHECK(g.uniform(5.0, 5.0) == 5.0);
}

TEST_CASE("below produces all residues in range") {
    RngStream g(RngStream::derive(3, "below"));
    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        uint64_t v = g.below(7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("bernoulli boundaries") {
    RngStream g(RngStream::derive(4, "bern"));
    for (int i = 0; i < 100; ++i) {
        CHECK_FALSE(g.bernoulli(0.0));
        CHECK(g.bernoulli(1.0));
    }
}

TEST_CASE("normal draws match requested moments") {
    RngStream g(RngStream::derive(5, "normal"));
    const int n = 50000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        double x = g.normal(2.0, 3.0);
        sum += x;
        sq += x * x;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
    CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("draw independence across streams") {
    // Consuming extra draws on one stream never perturbs another.
    RngStream a1(RngStream::derive(9, "dev", 1));
    uint64_t expected = RngStream(RngStream::derive(9, "dev", 2)).next_u64();
    for (int i = 0; i < 17; ++i) a1.next_u64();
    RngStream b(RngStream::derive(9, "dev", 2));
    CHECK(b.next_u64() == expected);
}

TEST_CASE("permutation is a permutation and seed-stable") {
    RngStream g1(RngStream::derive(6, "perm"));
    RngStream g2(RngStream::derive(6, "perm"));
    auto p1 = random_permutation(100, g1);
    auto p2 = random_permutation(100, g2);
    CHECK(p1 == p2);
    std::set<uint32_t> seen(p1.begin(), p1.end());
    CHECK(seen.size() == 100);
}

TEST_CASE("sample_without_replacement picks distinct pool members") {
    RngStream g(RngStream::derive(7, "sample"));
    std::vector<int> pool;
    for (int i = 0; i < 50; ++i) pool.push_back(i * 2);
    auto picks = sample_without_replacement(pool, 20, g);
    CHECK(picks.size() == 20);
    std::set<int> seen(picks.begin(), picks.end());
    CHECK(seen.size() == 20);
    for (int v : picks) CHECK(v % 2 == 0);
}
