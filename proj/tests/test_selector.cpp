#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "flude/selector.hpp"

using namespace flude;

namespace {

struct Snapshot {
    std::vector<int> online;
    std::vector<DependabilityEstimate> estimates;
    std::vector<uint8_t> explored;
    FrequencyState freq;
};

Snapshot make_snapshot(int n_devices) {
    Snapshot s;
    s.estimates.assign(static_cast<size_t>(n_devices), DependabilityEstimate{});
    s.explored.assign(static_cast<size_t>(n_devices), 0);
    s.freq = {0, 0, n_devices};
    return s;
}

} // namespace

TEST_CASE("exhaustive pools fill the target exactly") {
    Snapshot s = make_snapshot(3);
    s.online = {0, 1, 2};
    s.explored = {1, 1, 0};
    s.estimates[0] = {9.0, 1.0, 1}; // mean 0.9
    s.estimates[1] = {5.0, 5.0, 1}; // mean 0.5
    s.freq.cumulative_selected = 2;

    RngStream g(RngStream::derive(1, "explore"));
    SelectionResult res = select_participants(s.online, s.estimates, s.explored, s.freq,
                                              {3, 1.0 / 3.0, 0.5}, g);
    CHECK(res.device_ids() == std::vector<int>{0, 1, 2});
    CHECK(res.newly_explored == std::vector<int>{2});
    CHECK_FALSE(res.shortfall);
}

TEST_CASE("pure exploitation takes the top priorities deterministically") {
    Snapshot s = make_snapshot(6);
    s.online = {0, 1, 2, 3, 4, 5};
    for (int i = 0; i < 6; ++i) {
        s.explored[static_cast<size_t>(i)] = 1;
        s.estimates[static_cast<size_t>(i)] = {2.0 + i, 2.0, 1};
    }
    s.freq.cumulative_selected = 12; // Q = 2 > q, nobody penalized
    RngStream g(RngStream::derive(2, "explore"));
    SelectionResult res =
        select_participants(s.online, s.estimates, s.explored, s.freq, {3, 0.0, 0.5}, g);
    // Highest means are devices 5, 4, 3.
    CHECK(res.device_ids() == std::vector<int>{3, 4, 5});
    for (const auto& e : res.selected) CHECK(e.via == SelectedVia::exploit);
}

TEST_CASE("equal priorities break ties on ascending id") {
    Snapshot s = make_snapshot(5);
    s.online = {0, 1, 2, 3, 4};
    for (int i = 0; i < 5; ++i) {
        s.explored[static_cast<size_t>(i)] = 1;
        s.estimates[static_cast<size_t>(i)] = {2.0, 2.0, 1};
    }
    RngStream g(RngStream::derive(3, "explore"));
    SelectionResult res =
        select_participants(s.online, s.estimates, s.explored, s.freq, {2, 0.0, 0.5}, g);
    CHECK(res.device_ids() == std::vector<int>{0, 1});
}

TEST_CASE("exploration never returns explored devices, exploitation never fresh ones") {
    RngStream seeds(RngStream::derive(4, "cases"));
    for (int trial = 0; trial < 100; ++trial) {
        Snapshot s = make_snapshot(30);
        for (int i = 0; i < 30; ++i) {
            if (seeds.bernoulli(0.6)) s.online.push_back(i);
            s.explored[static_cast<size_t>(i)] = seeds.bernoulli(0.5) ? 1 : 0;
            s.estimates[static_cast<size_t>(i)] = {1.0 + seeds.uniform(0, 5),
                                                   1.0 + seeds.uniform(0, 5),
                                                   static_cast<int64_t>(seeds.below(10))};
        }
        s.freq.cumulative_selected = static_cast<int64_t>(seeds.below(100));
        int x = 1 + static_cast<int>(seeds.below(20));
        double eps = seeds.uniform(0.0, 1.0);
        RngStream g(RngStream::derive(5, "explore", static_cast<uint64_t>(trial)));
        SelectionResult res = select_participants(s.online, s.estimates, s.explored, s.freq,
                                                  {x, eps, 0.5}, g);
        std::set<int> online_set(s.online.begin(), s.online.end());
        std::set<int> seen;
        for (const auto& e : res.selected) {
            CHECK(online_set.count(e.device_id) == 1); // S ⊆ D
            CHECK(seen.insert(e.device_id).second);    // no duplicates
            if (e.via == SelectedVia::exploit)
                CHECK(s.explored[static_cast<size_t>(e.device_id)] == 1);
            else
                CHECK(s.explored[static_cast<size_t>(e.device_id)] == 0);
        }
        CHECK(res.selected.size() <= static_cast<size_t>(x));
        size_t available = s.online.size();
        if (available >= static_cast<size_t>(x)) CHECK(res.selected.size() == static_cast<size_t>(x));
    }
}

TEST_CASE("shortfall flag raises when online pool is too small") {
    Snapshot s = make_snapshot(4);
    s.online = {1, 3};
    RngStream g(RngStream::derive(6, "explore"));
    SelectionResult res =
        select_participants(s.online, s.estimates, s.explored, s.freq, {3, 0.5, 0.5}, g);
    CHECK(res.shortfall);
    CHECK(res.selected.size() == 2);
}

TEST_CASE("quota spills between pools") {
    // All explored: exploration quota falls back to exploitation.
    Snapshot s = make_snapshot(6);
    s.online = {0, 1, 2, 3, 4, 5};
    for (int i = 0; i < 6; ++i) {
        s.explored[static_cast<size_t>(i)] = 1;
        s.estimates[static_cast<size_t>(i)] = {2.0 + i, 2.0, 1};
    }
    RngStream g(RngStream::derive(7, "explore"));
    SelectionResult res =
        select_participants(s.online, s.estimates, s.explored, s.freq, {4, 0.9, 0.5}, g);
    CHECK(res.selected.size() == 4);
    CHECK(res.newly_explored.empty());

    // Nobody explored: exploitation quota falls back to exploration.
    Snapshot t = make_snapshot(6);
    t.online = {0, 1, 2, 3, 4, 5};
    RngStream g2(RngStream::derive(8, "explore"));
    SelectionResult res2 =
        select_participants(t.online, t.estimates, t.explored, t.freq, {4, 0.1, 0.5}, g2);
    CHECK(res2.selected.size() == 4);
    CHECK(res2.newly_explored.size() == 4);
}

TEST_CASE("selection is reproducible given the same stream") {
    Snapshot s = make_snapshot(20);
    for (int i = 0; i < 20; ++i) s.online.push_back(i);
    RngStream g1(RngStream::derive(9, "explore"));
    RngStream g2(RngStream::derive(9, "explore"));
    auto r1 = select_participants(s.online, s.estimates, s.explored, s.freq, {10, 0.7, 0.5}, g1);
    auto r2 = select_participants(s.online, s.estimates, s.explored, s.freq, {10, 0.7, 0.5}, g2);
    CHECK(r1.device_ids() == r2.device_ids());
}

TEST_CASE("epsilon decay schedule") {
    CHECK(decay_epsilon(0.9) == doctest::Approx(0.882).epsilon(1e-12));
    CHECK(decay_epsilon(0.2) == 0.2);
    CHECK(decay_epsilon(0.201) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(decay_epsilon(0.1) == 0.1); // below the floor: untouched
}

TEST_CASE("explored set growth matches the exploration schedule") {
    // With every device online and pools never exhausted, the explored-set
    // size after each round equals the accumulated exploration quota:
    // |C_r| = min(N, sum_k (X - floor((1-eps_k) X))).
    const int n = 250, x = 50;
    Snapshot s = make_snapshot(n);
    for (int i = 0; i < n; ++i) s.online.push_back(i);
    double eps = 0.9;
    size_t expected = 0;
    for (int round = 1; round <= 40; ++round) {
        RngStream g(RngStream::derive(10, "explore", static_cast<uint64_t>(round)));
        SelectionResult res =
            select_participants(s.online, s.estimates, s.explored, s.freq, {x, eps, 0.5}, g);
        for (int id : res.newly_explored) s.explored[static_cast<size_t>(id)] = 1;
        for (int id : res.device_ids())
            s.estimates[static_cast<size_t>(id)].participation += 1;
        s.freq.cumulative_selected += static_cast<int64_t>(res.device_ids().size());
        s.freq.round = round;

        size_t exploit_quota = static_cast<size_t>(std::floor((1.0 - eps) * x));
        size_t explore_quota = static_cast<size_t>(x) - exploit_quota;
        size_t explored_before = expected;
        size_t fresh_pool = static_cast<size_t>(n) - explored_before;
        size_t explore_take = std::min(explore_quota, fresh_pool);
        // Exploitation shortfall spills into exploration while C is small.
        size_t exploit_take = std::min(exploit_quota, explored_before);
        size_t deficit = static_cast<size_t>(x) - exploit_take - explore_take;
        size_t spill = std::min(deficit, explored_before - exploit_take);
        exploit_take += spill;
        deficit -= spill;
        explore_take += std::min(deficit, fresh_pool - explore_take);
        expected += explore_take;

        size_t actual = 0;
        for (uint8_t e : s.explored) actual += e;
        REQUIRE(actual == expected);
        eps = decay_epsilon(eps);
    }
}
