#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flude/env.hpp"
#include "flude/metrics.hpp"
#include "flude/round_engine.hpp"
#include "flude/trainer.hpp"

namespace flude {

/// A fully resolved run configuration. Everything a run needs; defaults
/// applied, ranges checked, unknown keys rejected.
struct Scenario {
    uint64_t seed = 0;
    int64_t rounds = 300;
    Variant variant = Variant::flude;
    EnvConfig env;
    TaskConfig task;
    TrainerConfig trainer;
    FludeParams flude;
};

struct ScenarioValidation {
    Scenario scenario;
    std::vector<std::string> errors;

    bool ok() const { return errors.empty(); }
};

namespace scenario_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where, std::vector<std::string>& errors) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            errors.push_back(where + ": unknown key \"" + it.key() + "\"");
}

template <typename T>
bool fetch(const json& obj, const std::string& key, T& out, const std::string& where,
           std::vector<std::string>& errors) {
    if (!obj.contains(key)) return false;
    try {
        out = obj.at(key).get<T>();
        return true;
    } catch (const std::exception&) {
        errors.push_back(where + "." + key + ": wrong type");
        return false;
    }
}

} // namespace scenario_detail

inline ScenarioValidation parse_scenario(const nlohmann::json& j) {
    using scenario_detail::check_keys;
    using scenario_detail::fetch;

    ScenarioValidation v;
    auto& errors = v.errors;
    Scenario& s = v.scenario;

    if (!j.is_object()) {
        errors.push_back("scenario: top level must be a JSON object");
        return v;
    }
    check_keys(j, {"seed", "rounds", "variant", "env", "task", "trainer", "flude"},
               "scenario", errors);

    if (!fetch(j, "seed", s.seed, "scenario", errors))
        if (!j.contains("seed")) errors.push_back("scenario.seed: required");
    fetch(j, "rounds", s.rounds, "scenario", errors);
    if (s.rounds < 0) errors.push_back("scenario.rounds: must be >= 0");

    std::string variant_name = "flude";
    fetch(j, "variant", variant_name, "scenario", errors);
    if (auto var = parse_variant(variant_name))
        s.variant = *var;
    else
        errors.push_back("scenario.variant: unknown variant \"" + variant_name + "\"");

    // env: every field required when the section is present.
    s.env.seed = s.seed;
    if (j.contains("env")) {
        const auto& e = j.at("env");
        if (!e.is_object()) {
            errors.push_back("env: must be an object");
        } else {
            check_keys(e,
                       {"n_devices", "group_means", "group_variance", "online_interval_s",
                        "bandwidth_range", "per_sample_seconds", "seed"},
                       "env", errors);
            for (const char* key : {"n_devices", "group_means", "group_variance",
                                    "online_interval_s", "bandwidth_range",
                                    "per_sample_seconds", "seed"})
                if (!e.contains(key))
                    errors.push_back(std::string("env.") + key + ": required when env is present");
            fetch(e, "n_devices", s.env.n_devices, "env", errors);
            fetch(e, "group_means", s.env.group_means, "env", errors);
            fetch(e, "group_variance", s.env.group_variance, "env", errors);
            fetch(e, "online_interval_s", s.env.online_interval_s, "env", errors);
            fetch(e, "seed", s.env.seed, "env", errors);
            std::vector<double> bw;
            if (fetch(e, "bandwidth_range", bw, "env", errors)) {
                if (bw.size() != 2)
                    errors.push_back("env.bandwidth_range: expected [min_mbps, max_mbps]");
                else {
                    s.env.bandwidth_range.min_mbps = bw[0];
                    s.env.bandwidth_range.max_mbps = bw[1];
                }
            }
            if (e.contains("per_sample_seconds")) {
                const auto& pss = e.at("per_sample_seconds");
                if (!pss.is_object()) {
                    errors.push_back("env.per_sample_seconds: expected {high, medium, low}");
                } else {
                    check_keys(pss, {"high", "medium", "low"}, "env.per_sample_seconds", errors);
                    fetch(pss, "high", s.env.per_sample_seconds[0], "env.per_sample_seconds", errors);
                    fetch(pss, "medium", s.env.per_sample_seconds[1], "env.per_sample_seconds", errors);
                    fetch(pss, "low", s.env.per_sample_seconds[2], "env.per_sample_seconds", errors);
                }
            }
        }
    }
    if (s.env.n_devices < 1) errors.push_back("env.n_devices: must be >= 1");
    if (s.env.group_means.empty()) errors.push_back("env.group_means: must be non-empty");
    for (double m : s.env.group_means)
        if (!(m >= 0.0 && m < 1.0)) errors.push_back("env.group_means: entries must lie in [0,1)");
    if (!(s.env.group_variance > 0.0)) errors.push_back("env.group_variance: must be > 0");
    if (!(s.env.online_interval_s > 0.0)) errors.push_back("env.online_interval_s: must be > 0");
    if (!(s.env.bandwidth_range.min_mbps > 0.0) ||
        s.env.bandwidth_range.max_mbps < s.env.bandwidth_range.min_mbps)
        errors.push_back("env.bandwidth_range: need 0 < min <= max");
    for (double t : s.env.per_sample_seconds)
        if (!(t > 0.0)) errors.push_back("env.per_sample_seconds: entries must be > 0");

    if (j.contains("task")) {
        const auto& t = j.at("task");
        if (!t.is_object()) {
            errors.push_back("task: must be an object");
        } else {
            check_keys(t,
                       {"n_classes", "dim", "samples_per_device", "classes_per_device",
                        "mean_separation", "device_spread", "label_noise",
                        "test_samples_per_class"},
                       "task", errors);
            fetch(t, "n_classes", s.task.n_classes, "task", errors);
            fetch(t, "dim", s.task.dim, "task", errors);
            fetch(t, "samples_per_device", s.task.samples_per_device, "task", errors);
            fetch(t, "classes_per_device", s.task.classes_per_device, "task", errors);
            fetch(t, "mean_separation", s.task.mean_separation, "task", errors);
            fetch(t, "device_spread", s.task.device_spread, "task", errors);
            fetch(t, "label_noise", s.task.label_noise, "task", errors);
            fetch(t, "test_samples_per_class", s.task.test_samples_per_class, "task", errors);
        }
    }
    if (s.task.n_classes < 2) errors.push_back("task.n_classes: must be >= 2");
    if (s.task.dim < 1) errors.push_back("task.dim: must be >= 1");
    if (s.task.samples_per_device < 1) errors.push_back("task.samples_per_device: must be >= 1");
    if (s.task.classes_per_device < 1 || s.task.classes_per_device > s.task.n_classes)
        errors.push_back("task.classes_per_device: must lie in [1, n_classes]");
    if (!(s.task.mean_separation > 0.0)) errors.push_back("task.mean_separation: must be > 0");
    if (s.task.device_spread < 0.0) errors.push_back("task.device_spread: must be >= 0");
    if (!(s.task.label_noise >= 0.0 && s.task.label_noise < 1.0))
        errors.push_back("task.label_noise: must lie in [0,1)");
    if (s.task.test_samples_per_class < 1)
        errors.push_back("task.test_samples_per_class: must be >= 1");

    if (j.contains("trainer")) {
        const auto& t = j.at("trainer");
        if (!t.is_object()) {
            errors.push_back("trainer: must be an object");
        } else {
            check_keys(t,
                       {"batch_size", "learning_rate", "local_pass_fraction", "hidden_width",
                        "checkpoint_ticks"},
                       "trainer", errors);
            fetch(t, "batch_size", s.trainer.batch_size, "trainer", errors);
            fetch(t, "learning_rate", s.trainer.learning_rate, "trainer", errors);
            fetch(t, "local_pass_fraction", s.trainer.local_pass_fraction, "trainer", errors);
            fetch(t, "hidden_width", s.trainer.hidden_width, "trainer", errors);
            fetch(t, "checkpoint_ticks", s.trainer.checkpoint_ticks, "trainer", errors);
        }
    }
    if (s.trainer.batch_size < 1) errors.push_back("trainer.batch_size: must be >= 1");
    if (!(s.trainer.learning_rate > 0.0)) errors.push_back("trainer.learning_rate: must be > 0");
    if (!(s.trainer.local_pass_fraction > 0.0 && s.trainer.local_pass_fraction <= 1.0))
        errors.push_back("trainer.local_pass_fraction: must lie in (0,1]");
    if (s.trainer.hidden_width < 0) errors.push_back("trainer.hidden_width: must be >= 0");
    if (s.trainer.checkpoint_ticks < 1) errors.push_back("trainer.checkpoint_ticks: must be >= 1");

    if (j.contains("flude")) {
        const auto& f = j.at("flude");
        if (!f.is_object()) {
            errors.push_back("flude: must be an object");
        } else {
            check_keys(f,
                       {"b_max", "round_deadline_s", "sigma", "lambda", "mu", "epsilon0",
                        "epsilon_decay", "epsilon_floor", "w0", "w_min", "w_max", "prior_alpha",
                        "prior_beta", "max_participants", "target_accuracy"},
                       "flude", errors);
            fetch(f, "b_max", s.flude.b_max, "flude", errors);
            fetch(f, "round_deadline_s", s.flude.round_deadline_s, "flude", errors);
            fetch(f, "sigma", s.flude.sigma, "flude", errors);
            fetch(f, "lambda", s.flude.lambda, "flude", errors);
            fetch(f, "mu", s.flude.mu, "flude", errors);
            fetch(f, "epsilon0", s.flude.epsilon0, "flude", errors);
            fetch(f, "epsilon_decay", s.flude.epsilon_decay, "flude", errors);
            fetch(f, "epsilon_floor", s.flude.epsilon_floor, "flude", errors);
            fetch(f, "w0", s.flude.w0, "flude", errors);
            fetch(f, "w_min", s.flude.w_min, "flude", errors);
            fetch(f, "w_max", s.flude.w_max, "flude", errors);
            fetch(f, "prior_alpha", s.flude.prior_alpha, "flude", errors);
            fetch(f, "prior_beta", s.flude.prior_beta, "flude", errors);
            fetch(f, "max_participants", s.flude.max_participants, "flude", errors);
            fetch(f, "target_accuracy", s.flude.target_accuracy, "flude", errors);
        }
    }
    if (!(s.flude.b_max >= 2.0)) errors.push_back("flude.b_max: must be >= 2");
    if (!(s.flude.round_deadline_s > 0.0)) errors.push_back("flude.round_deadline_s: must be > 0");
    if (s.flude.sigma < 0.0) errors.push_back("flude.sigma: must be >= 0");
    if (s.flude.lambda < 0.0) errors.push_back("flude.lambda: must be >= 0");
    if (s.flude.mu < 0.0) errors.push_back("flude.mu: must be >= 0");
    if (!(s.flude.epsilon0 >= 0.0 && s.flude.epsilon0 <= 1.0))
        errors.push_back("flude.epsilon0: must lie in [0,1]");
    if (!(s.flude.epsilon_decay > 0.0 && s.flude.epsilon_decay <= 1.0))
        errors.push_back("flude.epsilon_decay: must lie in (0,1]");
    if (!(s.flude.epsilon_floor >= 0.0 && s.flude.epsilon_floor <= 1.0))
        errors.push_back("flude.epsilon_floor: must lie in [0,1]");
    if (!(s.flude.w_min > 0.0) || s.flude.w_max < s.flude.w_min)
        errors.push_back("flude.w_min/w_max: need 0 < w_min <= w_max");
    if (s.flude.w0 < s.flude.w_min || s.flude.w0 > s.flude.w_max)
        errors.push_back("flude.w0: must lie in [w_min, w_max]");
    if (!(s.flude.prior_alpha > 0.0) || !(s.flude.prior_beta > 0.0))
        errors.push_back("flude.prior_alpha/prior_beta: must be > 0");
    if (s.flude.max_participants < 1) errors.push_back("flude.max_participants: must be >= 1");
    if (!(s.flude.target_accuracy > 0.0 && s.flude.target_accuracy <= 1.0))
        errors.push_back("flude.target_accuracy: must lie in (0,1]");

    return v;
}

/// Every violation is collected, not just the first.
inline ScenarioValidation validate_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ScenarioValidation v;
        v.errors.push_back("cannot open scenario file: " + path);
        return v;
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        ScenarioValidation v;
        v.errors.push_back(std::string("JSON parse error: ") + e.what());
        return v;
    }
    return parse_scenario(j);
}

/// Fully resolved scenario back to JSON (used for the checkpoint echo).
inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["seed"] = s.seed;
    j["rounds"] = s.rounds;
    j["variant"] = to_string(s.variant);
    j["env"] = {
        {"n_devices", s.env.n_devices},
        {"group_means", s.env.group_means},
        {"group_variance", s.env.group_variance},
        {"online_interval_s", s.env.online_interval_s},
        {"bandwidth_range", {s.env.bandwidth_range.min_mbps, s.env.bandwidth_range.max_mbps}},
        {"per_sample_seconds",
         {{"high", s.env.per_sample_seconds[0]},
          {"medium", s.env.per_sample_seconds[1]},
          {"low", s.env.per_sample_seconds[2]}}},
        {"seed", s.env.seed},
    };
    j["task"] = {
        {"n_classes", s.task.n_classes},
        {"dim", s.task.dim},
        {"samples_per_device", s.task.samples_per_device},
        {"classes_per_device", s.task.classes_per_device},
        {"mean_separation", s.task.mean_separation},
        {"device_spread", s.task.device_spread},
        {"label_noise", s.task.label_noise},
        {"test_samples_per_class", s.task.test_samples_per_class},
    };
    j["trainer"] = {
        {"batch_size", s.trainer.batch_size},
        {"learning_rate", s.trainer.learning_rate},
        {"local_pass_fraction", s.trainer.local_pass_fraction},
        {"hidden_width", s.trainer.hidden_width},
        {"checkpoint_ticks", s.trainer.checkpoint_ticks},
    };
    j["flude"] = {
        {"b_max", s.flude.b_max},
        {"round_deadline_s", s.flude.round_deadline_s},
        {"sigma", s.flude.sigma},
        {"lambda", s.flude.lambda},
        {"mu", s.flude.mu},
        {"epsilon0", s.flude.epsilon0},
        {"epsilon_decay", s.flude.epsilon_decay},
        {"epsilon_floor", s.flude.epsilon_floor},
        {"w0", s.flude.w0},
        {"w_min", s.flude.w_min},
        {"w_max", s.flude.w_max},
        {"prior_alpha", s.flude.prior_alpha},
        {"prior_beta", s.flude.prior_beta},
        {"max_participants", s.flude.max_participants},
        {"target_accuracy", s.flude.target_accuracy},
    };
    return j;
}

} // namespace flude
