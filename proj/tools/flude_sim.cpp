// flude_sim: run, compare, resume and validate FLUDE simulation scenarios.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flude/flude.hpp"

namespace {

void print_summary(const flude::RunSummary& s) {
    std::printf("rounds:            %lld\n", static_cast<long long>(s.rounds));
    std::printf("final accuracy:    %.4f\n", s.final_accuracy);
    if (s.time_to_accuracy_s)
        std::printf("time to %.2f acc:  %.1f virtual s\n", s.target_accuracy,
                    *s.time_to_accuracy_s);
    else
        std::printf("time to %.2f acc:  not reached\n", s.target_accuracy);
    std::printf("comm units:        %lld\n", static_cast<long long>(s.total_comm_units));
    std::printf("participation gini: %.4f\n", s.gini_participation);
}

int load_or_fail(const std::string& path, flude::Scenario& out) {
    flude::ScenarioValidation v = flude::validate_scenario(path);
    if (!v.ok()) {
        std::fprintf(stderr, "scenario invalid (%zu problem%s):\n", v.errors.size(),
                     v.errors.size() == 1 ? "" : "s");
        for (const auto& e : v.errors) std::fprintf(stderr, "  - %s\n", e.c_str());
        return 1;
    }
    out = v.scenario;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FLUDE federated-learning simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = "out", variant, checkpoint_path;
    int seeds = 5;
    std::optional<int64_t> rounds_override;
    bool quiet = false;
    int64_t rounds_flag = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_flag("--quiet", quiet, "suppress progress output");
    };

    CLI::App* run = app.add_subcommand("run", "run one scenario to completion");
    run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--variant", variant, "override the scenario variant");
    run->add_option("--rounds", rounds_flag, "override the round count");
    add_common(run);

    CLI::App* compare = app.add_subcommand("compare", "run the variant matrix across seeds");
    compare->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    compare->add_option("--out", out_dir, "output directory");
    compare->add_option("--seeds", seeds, "number of paired seeds")->check(CLI::PositiveNumber);
    compare->add_option("--rounds", rounds_flag, "override the round count");
    add_common(compare);

    CLI::App* resume = app.add_subcommand("resume", "continue from a run checkpoint");
    resume->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    resume->add_option("--rounds", rounds_flag, "override the total round count");
    add_common(resume);

    CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    add_common(validate);

    CLI11_PARSE(app, argc, argv);
    if (rounds_flag >= 0) rounds_override = rounds_flag;

    try {
        if (app.got_subcommand(validate)) {
            flude::Scenario s;
            if (int rc = load_or_fail(scenario_path, s)) return rc;
            std::printf("scenario OK: %d devices, %lld rounds, variant %s, seed %llu\n",
                        s.env.n_devices, static_cast<long long>(s.rounds),
                        flude::to_string(s.variant),
                        static_cast<unsigned long long>(s.seed));
            return 0;
        }
        if (app.got_subcommand(run)) {
            flude::Scenario s;
            if (int rc = load_or_fail(scenario_path, s)) return rc;
            if (!variant.empty()) {
                auto v = flude::parse_variant(variant);
                if (!v) {
                    std::fprintf(stderr, "unknown variant: %s\n", variant.c_str());
                    return 1;
                }
                s.variant = *v;
            }
            flude::RunResult r = flude::run_scenario(s, out_dir, quiet, rounds_override);
            if (!quiet) print_summary(r.summary);
            return 0;
        }
        if (app.got_subcommand(resume)) {
            flude::RunResult r = flude::resume_run(checkpoint_path, rounds_override, quiet);
            if (!quiet) print_summary(r.summary);
            return 0;
        }
        if (app.got_subcommand(compare)) {
            flude::Scenario s;
            if (int rc = load_or_fail(scenario_path, s)) return rc;
            if (rounds_override) s.rounds = *rounds_override;
            auto rows = flude::run_compare(s, out_dir, seeds, quiet);
            if (!quiet)
                std::printf("wrote %zu summary rows to %s/comparison.csv\n", rows.size(),
                            out_dir.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
