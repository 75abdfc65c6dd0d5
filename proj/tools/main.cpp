#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedu/errors.hpp"
#include "fedu/experiment.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct CommonArgs {
    std::string config_path;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("-c,--config", args.config_path, "experiment config file")->required();
    sub->add_option("-o,--output", args.output_dir,
                    "output directory (overrides config and FEDU_OUTPUT_DIR)");
    sub->add_option("--seed", args.seed, "master seed override");
    sub->add_option("--workers", args.workers, "max concurrent client trainers");
}

fedu::ExperimentConfig load_config(const CommonArgs& args) {
    fedu::ExperimentConfig config = fedu::parse_config_file(args.config_path);
    if (args.output_dir) config.output_dir = *args.output_dir;
    if (args.seed) config.seed = *args.seed;
    if (args.workers) config.workers = *args.workers;
    config.validate();
    return config;
}

json json_or_null(const std::optional<fedu::Scalar>& v) {
    if (v) return *v;
    return nullptr;
}

json artifacts_json(const fedu::RunArtifacts& artifacts, const std::string& mode) {
    json out;
    out["mode"] = mode;
    out["output_dir"] = artifacts.output_dir;
    out["summary_path"] = artifacts.summary_path;
    out["metrics_path"] = artifacts.metrics_path;
    out["final"] = {{"knn_accuracy", artifacts.final_knn},
                    {"probe_accuracy", artifacts.final_probe}};
    out["rounds_completed"] = artifacts.rounds_completed;
    out["wall_ms"] = artifacts.wall_ms;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated self-supervised representation learning simulator"};
    app.require_subcommand(1);

    CommonArgs run_args;
    CLI::App* run = app.add_subcommand("run", "execute a federated training run");
    add_common(run, run_args);

    CommonArgs sweep_args;
    std::string axis_name;
    std::vector<double> sweep_values;
    bool adjusted_lr = false;
    CLI::App* sweep = app.add_subcommand("sweep", "one run per value along a config axis");
    add_common(sweep, sweep_args);
    sweep->add_option("--axis", axis_name, "mu | local_epochs | num_clients | batch_size")
        ->required();
    sweep->add_option("--values", sweep_values, "comma-separated axis values")
        ->required()
        ->delimiter(',');
    sweep->add_flag("--adjusted-lr", adjusted_lr,
                    "batch-size axis only: scale the learning rate as B * lr0 / B0");

    CommonArgs eval_args;
    std::string checkpoint_path;
    std::optional<double> semi_fraction;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a saved encoder checkpoint");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", checkpoint_path, "encoder checkpoint path")->required();
    eval->add_option("--semi", semi_fraction,
                     "also fine-tune encoder+head on this labeled fraction in (0, 1]");

    CommonArgs baseline_args;
    std::string mode;
    CLI::App* baseline = app.add_subcommand("baseline", "non-federated reference runs");
    add_common(baseline, baseline_args);
    baseline->add_option("--mode", mode, "single_client | centralized")
        ->required()
        ->check(CLI::IsMember({"single_client", "centralized"}));

    CommonArgs inspect_args;
    CLI::App* inspect =
        app.add_subcommand("partition-inspect", "report per-client sizes and class histograms");
    add_common(inspect, inspect_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (*run) {
            const fedu::RunArtifacts artifacts = fedu::run_experiment(load_config(run_args));
            std::cout << artifacts_json(artifacts, "fedu").dump(2) << '\n';
        } else if (*sweep) {
            const fedu::ExperimentConfig config = load_config(sweep_args);
            const fedu::SweepAxis axis = fedu::sweep_axis_from_string(axis_name);
            const std::vector<fedu::Scalar> values(sweep_values.begin(), sweep_values.end());
            const fedu::SweepArtifacts artifacts = fedu::run_sweep(config, axis, values,
                                                                   adjusted_lr);
            json rows = json::array();
            for (const auto& row : artifacts.rows) {
                rows.push_back({{"value", row.value},
                                {"learning_rate", row.learning_rate},
                                {"knn_accuracy", json_or_null(row.knn_accuracy)},
                                {"probe_accuracy", json_or_null(row.probe_accuracy)},
                                {"status", row.status}});
            }
            json out;
            out["axis"] = fedu::to_string(axis);
            out["csv_path"] = artifacts.csv_path;
            out["rows"] = rows;
            std::cout << out.dump(2) << '\n';
        } else if (*eval) {
            const fedu::ExperimentConfig config = load_config(eval_args);
            std::optional<fedu::Scalar> semi;
            if (semi_fraction) semi = *semi_fraction;
            const fedu::EvalReport report = fedu::evaluate_checkpoint(config, checkpoint_path,
                                                                      semi);
            json out;
            out["checkpoint"] = checkpoint_path;
            out["knn_accuracy"] = report.knn_accuracy;
            out["probe_accuracy"] = report.probe_accuracy;
            out["finetune_accuracy"] = json_or_null(report.finetune_accuracy);
            std::cout << out.dump(2) << '\n';
        } else if (*baseline) {
            const fedu::ExperimentConfig config = load_config(baseline_args);
            const bool single = mode == "single_client";
            const fedu::RunArtifacts artifacts = single
                                                     ? fedu::run_single_client_baseline(config)
                                                     : fedu::run_centralized_baseline(config);
            std::cout << artifacts_json(artifacts, single ? "baseline_single_client"
                                                          : "baseline_centralized")
                             .dump(2)
                      << '\n';
        } else if (*inspect) {
            const fedu::ExperimentConfig config = load_config(inspect_args);
            const fedu::PartitionReport report = fedu::inspect_partition(config);
            json out;
            out["clients"] = report.sizes.size();
            out["sizes"] = report.sizes;
            out["class_counts"] = report.class_counts;
            std::cout << out.dump(2) << '\n';
        }
    } catch (const fedu::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
    return 0;
}
