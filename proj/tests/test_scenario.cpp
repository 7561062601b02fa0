#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "flude/scenario.hpp"

using namespace flude;
using nlohmann::json;

namespace {

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
    return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) {
        return e.find(needle) != std::string::npos;
    });
}

} // namespace

TEST_CASE("minimal scenario gets every default") {
    ScenarioValidation v = parse_scenario(json{{"seed", 7}});
    REQUIRE(v.ok());
    const Scenario& s = v.scenario;
    CHECK(s.seed == 7);
    CHECK(s.env.seed == 7);
    CHECK(s.flude.sigma == 0.5);
    CHECK(s.flude.lambda == 1.0);
    CHECK(s.flude.mu == 0.5);
    CHECK(s.flude.epsilon0 == 0.9);
    CHECK(s.flude.epsilon_decay == 0.98);
    CHECK(s.flude.epsilon_floor == 0.2);
    CHECK(s.flude.prior_alpha == 2.0);
    CHECK(s.flude.prior_beta == 2.0);
    CHECK(s.env.n_devices == 250);
    CHECK(s.env.group_means == std::vector<double>{0.2, 0.4, 0.6});
    CHECK(s.env.group_variance == 0.04);
    CHECK(s.env.online_interval_s == 600.0);
    CHECK(s.trainer.batch_size == 32);
    CHECK(s.trainer.learning_rate == 0.04);
    CHECK(s.task.classes_per_device == 4);
    CHECK(s.variant == Variant::flude);
}

TEST_CASE("missing seed is an error") {
    ScenarioValidation v = parse_scenario(json::object());
    CHECK_FALSE(v.ok());
    CHECK(mentions(v.errors, "seed"));
}

TEST_CASE("out-of-range sigma is listed") {
    ScenarioValidation v = parse_scenario(json{{"seed", 1}, {"flude", {{"sigma", -1.0}}}});
    CHECK_FALSE(v.ok());
    CHECK(mentions(v.errors, "sigma"));
}

TEST_CASE("unknown keys are rejected by name") {
    ScenarioValidation v =
        parse_scenario(json{{"seed", 1}, {"flude", {{"sigma_typo", 0.5}}}});
    CHECK_FALSE(v.ok());
    CHECK(mentions(v.errors, "sigma_typo"));

    ScenarioValidation top = parse_scenario(json{{"seed", 1}, {"extra_section", 2}});
    CHECK_FALSE(top.ok());
    CHECK(mentions(top.errors, "extra_section"));
}

TEST_CASE("env section requires every field when present") {
    ScenarioValidation v = parse_scenario(json{{"seed", 1}, {"env", {{"n_devices", 10}}}});
    CHECK_FALSE(v.ok());
    CHECK(mentions(v.errors, "group_means"));
    CHECK(mentions(v.errors, "bandwidth_range"));
    CHECK(mentions(v.errors, "per_sample_seconds"));
}

TEST_CASE("complete env section parses") {
    json env = {{"n_devices", 24},
                {"group_means", {0.3}},
                {"group_variance", 0.01},
                {"online_interval_s", 300.0},
                {"bandwidth_range", {2.0, 20.0}},
                {"per_sample_seconds", {{"high", 0.001}, {"medium", 0.002}, {"low", 0.004}}},
                {"seed", 99}};
    ScenarioValidation v = parse_scenario(json{{"seed", 1}, {"env", env}});
    REQUIRE(v.ok());
    CHECK(v.scenario.env.n_devices == 24);
    CHECK(v.scenario.env.seed == 99);
    CHECK(v.scenario.env.bandwidth_range.min_mbps == 2.0);
    CHECK(v.scenario.env.per_sample_seconds[2] == 0.004);
}

TEST_CASE("all violations are collected at once") {
    ScenarioValidation v = parse_scenario(json{
        {"seed", 1},
        {"rounds", -3},
        {"variant", "bogus"},
        {"flude", {{"sigma", -1.0}, {"b_max", 1.0}}},
        {"task", {{"classes_per_device", 99}}},
    });
    CHECK_FALSE(v.ok());
    CHECK(v.errors.size() >= 5);
    CHECK(mentions(v.errors, "rounds"));
    CHECK(mentions(v.errors, "variant"));
    CHECK(mentions(v.errors, "sigma"));
    CHECK(mentions(v.errors, "b_max"));
    CHECK(mentions(v.errors, "classes_per_device"));
}

TEST_CASE("scenario JSON round-trips through the serializer") {
    json in = {{"seed", 42},
               {"rounds", 77},
               {"variant", "least_distribution"},
               {"task", {{"n_classes", 6}, {"device_spread", 1.25}, {"mean_separation", 2.0}}},
               {"trainer", {{"hidden_width", 16}, {"learning_rate", 0.01}}},
               {"flude", {{"b_max", 44.0}, {"max_participants", 9}}}};
    ScenarioValidation v1 = parse_scenario(in);
    REQUIRE(v1.ok());
    ScenarioValidation v2 = parse_scenario(scenario_to_json(v1.scenario));
    REQUIRE(v2.ok());
    CHECK(scenario_to_json(v1.scenario) == scenario_to_json(v2.scenario));
    CHECK(v2.scenario.rounds == 77);
    CHECK(v2.scenario.variant == Variant::least_distribution);
    CHECK(v2.scenario.task.device_spread == 1.25);
    CHECK(v2.scenario.trainer.hidden_width == 16);
    CHECK(v2.scenario.flude.max_participants == 9);
}

TEST_CASE("file loading reports missing files and parse errors") {
    ScenarioValidation missing = validate_scenario("/nonexistent/path.json");
    CHECK_FALSE(missing.ok());

    const char* path = "bad_scenario_tmp.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    ScenarioValidation bad = validate_scenario(path);
    CHECK_FALSE(bad.ok());
    CHECK(mentions(bad.errors, "parse"));
    std::remove(path);
}

TEST_CASE("w0 must sit inside the clamp band") {
    ScenarioValidation v =
        parse_scenario(json{{"seed", 1}, {"flude", {{"w0", 0.5}}}});
    CHECK_FALSE(v.ok());
    CHECK(mentions(v.errors, "w0"));
}
