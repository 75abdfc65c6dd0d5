#include "fedu/experiment.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fedu/errors.hpp"
#include "fedu/eval.hpp"

namespace fedu {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kMetricsSchema = "fedu.metrics.v1";

json json_or_null(const std::optional<Scalar>& v) {
    if (v) return *v;
    return nullptr;
}

std::string decision_string(const std::optional<PredictorDecision>& d) {
    return d ? to_string(*d) : "";
}

void write_client_line(std::ofstream& out, int round, const ClientRoundRecord& row,
                       bool log_timing) {
    json line;
    line["type"] = "client";
    line["round"] = round;
    line["client_id"] = row.client_id;
    line["mean_loss"] = row.mean_loss;
    line["divergence"] = json_or_null(row.divergence);
    if (row.decision) {
        line["dapu_decision"] = to_string(*row.decision);
    } else {
        line["dapu_decision"] = nullptr;
    }
    line["wall_ms"] = log_timing ? row.wall_ms : 0.0;
    out << line.dump() << '\n';
}

void write_round_line(std::ofstream& out, const RoundRecord& record,
                      const std::optional<Scalar>& knn_accuracy, bool log_timing) {
    json line;
    line["type"] = "round";
    line["round"] = record.round;
    line["clients"] = record.clients.size();
    line["mean_loss"] = record.mean_loss();
    line["mean_divergence"] = json_or_null(record.mean_divergence());
    line["knn_accuracy"] = json_or_null(knn_accuracy);
    double wall = 0.0;
    if (log_timing) {
        for (const auto& c : record.clients) wall += c.wall_ms;
    }
    line["wall_ms"] = wall;
    out << line.dump() << '\n';
}

json config_echo(const ExperimentConfig& config) {
    json echo;
    for (const auto& [key, value] : config.to_key_values()) echo[key] = value;
    return echo;
}

std::string format_scalar(Scalar value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    (void)ec;
    return std::string(buffer, ptr);
}

struct RunContext {
    ExperimentData data;
    Partition partition;
    MlpSpec encoder_spec;
    MlpSpec predictor_spec;
};

RunContext build_context(const ExperimentConfig& config) {
    RunContext ctx;
    ctx.data = build_dataset(config);
    ctx.partition = build_partition(config, ctx.data.train);
    ctx.encoder_spec = config.encoder_spec(ctx.data.train.dim());
    ctx.predictor_spec = config.predictor_spec();
    ctx.encoder_spec.validate();
    ctx.predictor_spec.validate();
    return ctx;
}

std::filesystem::path prepare_output_dir(const ExperimentConfig& config) {
    std::filesystem::path dir = resolve_output_dir(config);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("run: cannot create output directory '" + dir.string() + "'");
    return dir;
}

RunArtifacts finalize_run(const ExperimentConfig& config, const std::filesystem::path& dir,
                          const std::string& mode, const ParameterSet& final_encoder,
                          Scalar final_knn, Scalar final_probe, int rounds_completed,
                          double wall_ms, const std::string& metrics_path,
                          std::vector<std::string> checkpoint_paths, json extra) {
    RunArtifacts artifacts;
    artifacts.output_dir = dir.string();
    artifacts.metrics_path = metrics_path;
    artifacts.rounds_completed = rounds_completed;
    artifacts.wall_ms = wall_ms;
    artifacts.final_knn = final_knn;
    artifacts.final_probe = final_probe;

    const std::string final_ckpt = (dir / "checkpoint_final.ckpt").string();
    final_encoder.save(final_ckpt);
    checkpoint_paths.push_back(final_ckpt);
    artifacts.checkpoint_paths = checkpoint_paths;

    const std::string echo_path = (dir / "config.resolved.cfg").string();
    write_config_file(config, echo_path);
    artifacts.config_echo_path = echo_path;

    json summary;
    summary["mode"] = mode;
    summary["final"] = {{"knn_accuracy", final_knn}, {"probe_accuracy", final_probe}};
    summary["rounds_completed"] = rounds_completed;
    summary["metrics_path"] = metrics_path;
    summary["checkpoints"] = checkpoint_paths;
    summary["config_echo_path"] = echo_path;
    summary["wall_ms"] = wall_ms;
    summary["config"] = config_echo(config);
    for (auto& [key, value] : extra.items()) summary[key] = value;

    const std::string summary_path = (dir / "summary.json").string();
    std::ofstream out(summary_path, std::ios::trunc);
    if (!out) throw ConfigError("run: cannot write '" + summary_path + "'");
    out << summary.dump(2) << '\n';
    artifacts.summary_path = summary_path;
    return artifacts;
}

}  // namespace

ExperimentData build_dataset(const ExperimentConfig& config) {
    config.validate();
    ExperimentData data;
    if (config.dataset == DatasetKind::Blobs) {
        Rng rng(derive_seed(config.seed, stream::kData));
        Dataset all = make_blobs(config.blobs_classes, config.blobs_dim,
                                 config.blobs_train_per_class + config.blobs_test_per_class,
                                 config.blobs_separation, rng);
        auto [train, test] = split_tail_per_class(all, config.blobs_test_per_class);
        data.train = std::move(train);
        data.test = std::move(test);
    } else {
        Dataset train = load_cifar10(config.cifar_path, config.cifar_downsample);
        if (!config.cifar_keep_classes.empty()) {
            train = filter_classes(train, config.cifar_keep_classes);
        }
        if (!config.cifar_test_path.empty()) {
            Dataset test = load_cifar10(config.cifar_test_path, config.cifar_downsample);
            if (!config.cifar_keep_classes.empty()) {
                test = filter_classes(test, config.cifar_keep_classes);
            }
            data.train = std::move(train);
            data.test = std::move(test);
        } else {
            auto [head, tail] = split_tail_per_class(train, config.cifar_holdout_per_class);
            data.train = std::move(head);
            data.test = std::move(tail);
        }
    }
    return data;
}

Partition build_partition(const ExperimentConfig& config, const Dataset& train) {
    Rng rng(derive_seed(config.seed, stream::kPartition));
    if (config.partition == PartitionScheme::Iid) {
        return partition_iid(train, config.clients, rng);
    }
    return partition_noniid(train, config.clients, rng);
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto run_start = std::chrono::steady_clock::now();
    RunContext ctx = build_context(config);
    auto dir = prepare_output_dir(config);

    auto [server, clients] = make_federation(ctx.data.train, ctx.partition, ctx.encoder_spec,
                                             ctx.predictor_spec, config.seed);
    SelectionConfig selection{config.clients, config.effective_clients_per_round()};

    const std::string metrics_path = (dir / "metrics.jsonl").string();
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) throw ConfigError("run: cannot write '" + metrics_path + "'");
    metrics << json{{"schema", kMetricsSchema}}.dump() << '\n';

    std::vector<std::string> checkpoint_paths;
    auto on_round = [&](const RoundRecord& record) {
        for (const auto& row : record.clients) {
            write_client_line(metrics, record.round, row, config.log_timing);
        }
        std::optional<Scalar> knn;
        if (config.eval_interval > 0 && (record.round + 1) % config.eval_interval == 0) {
            knn = knn_eval(ctx.encoder_spec, server.global_encoder, ctx.data.train, ctx.data.test,
                           config.eval);
        }
        write_round_line(metrics, record, knn, config.log_timing);
        if (config.checkpoint_interval > 0 &&
            (record.round + 1) % config.checkpoint_interval == 0) {
            const std::string path =
                (dir / ("checkpoint_round_" + std::to_string(record.round) + ".ckpt")).string();
            server.global_encoder.save(path);
            checkpoint_paths.push_back(path);
        }
    };
    run_training(server, clients, config.rounds, selection, config.train, config.augment,
                 config.protocol, config.seed, config.workers, on_round);
    metrics.flush();
    if (!metrics) throw ConfigError("run: write to '" + metrics_path + "' failed");

    const Scalar final_knn = knn_eval(ctx.encoder_spec, server.global_encoder, ctx.data.train,
                                      ctx.data.test, config.eval);
    Scalar final_probe = 0;
    {
        Rng rng(derive_seed(config.seed, stream::kEval));
        final_probe = linear_probe(ctx.encoder_spec, server.global_encoder, ctx.data.train,
                                   ctx.data.test, config.eval, rng);
    }

    const auto run_stop = std::chrono::steady_clock::now();
    const double wall_ms = std::chrono::duration<double, std::milli>(run_stop - run_start).count();
    return finalize_run(config, dir, "fedu", server.global_encoder, final_knn, final_probe,
                        config.rounds, wall_ms, metrics_path, std::move(checkpoint_paths),
                        json::object());
}

RunArtifacts run_single_client_baseline(const ExperimentConfig& config) {
    config.validate();
    const auto run_start = std::chrono::steady_clock::now();
    RunContext ctx = build_context(config);
    auto dir = prepare_output_dir(config);

    auto [server, clients] = make_federation(ctx.data.train, ctx.partition, ctx.encoder_spec,
                                             ctx.predictor_spec, config.seed);

    const std::string metrics_path = (dir / "metrics.jsonl").string();
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) throw ConfigError("run: cannot write '" + metrics_path + "'");
    metrics << json{{"schema", kMetricsSchema}}.dump() << '\n';

    // Same per-(client, round) streams as the federated path, but no server
    // interaction whatsoever: each client trains alone for the same compute.
    json per_client = json::array();
    Scalar knn_total = 0;
    Scalar probe_total = 0;
    for (ClientState& client : clients) {
        for (int r = 0; r < config.rounds; ++r) {
            Rng rng = client_train_rng(config.seed, client.id, r);
            const auto start = std::chrono::steady_clock::now();
            LocalTrainStats stats = local_train(client.online, client.target, client.samples,
                                                config.train, config.augment, rng);
            const auto stop = std::chrono::steady_clock::now();
            ClientRoundRecord row;
            row.client_id = client.id;
            row.mean_loss = stats.mean_loss();
            row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
            write_client_line(metrics, r, row, config.log_timing);
        }
        const Scalar knn = knn_eval(ctx.encoder_spec, client.online.encoder, ctx.data.train,
                                    ctx.data.test, config.eval);
        Rng probe_rng(derive_seed(config.seed, stream::kEval, client.id));
        const Scalar probe = linear_probe(ctx.encoder_spec, client.online.encoder, ctx.data.train,
                                          ctx.data.test, config.eval, probe_rng);
        knn_total += knn;
        probe_total += probe;
        per_client.push_back(
            {{"client_id", client.id}, {"knn_accuracy", knn}, {"probe_accuracy", probe}});
    }
    metrics.flush();
    if (!metrics) throw ConfigError("run: write to '" + metrics_path + "' failed");
    const auto count = static_cast<Scalar>(clients.size());

    const auto run_stop = std::chrono::steady_clock::now();
    const double wall_ms = std::chrono::duration<double, std::milli>(run_stop - run_start).count();

    // "final" carries the mean over clients; the final checkpoint holds
    // client 0's encoder for inspection.
    json extra;
    extra["clients"] = per_client;
    return finalize_run(config, dir, "baseline_single_client", clients[0].online.encoder,
                        knn_total / count, probe_total / count, config.rounds, wall_ms,
                        metrics_path, {}, extra);
}

RunArtifacts run_centralized_baseline(const ExperimentConfig& config) {
    ExperimentConfig centralized = config;
    centralized.clients = 1;
    centralized.clients_per_round = 0;
    centralized.validate();
    RunArtifacts artifacts = run_experiment(centralized);
    // Re-tag the summary in place.
    std::ifstream in(artifacts.summary_path);
    json summary = json::parse(in);
    in.close();
    summary["mode"] = "baseline_centralized";
    std::ofstream out(artifacts.summary_path, std::ios::trunc);
    out << summary.dump(2) << '\n';
    return artifacts;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "mu") return SweepAxis::Mu;
    if (name == "local_epochs") return SweepAxis::LocalEpochs;
    if (name == "num_clients") return SweepAxis::NumClients;
    if (name == "batch_size") return SweepAxis::BatchSize;
    throw ConfigError("sweep: unknown axis '" + name +
                      "' (expected mu, local_epochs, num_clients, or batch_size)");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Mu: return "mu";
        case SweepAxis::LocalEpochs: return "local_epochs";
        case SweepAxis::NumClients: return "num_clients";
        default: return "batch_size";
    }
}

SweepArtifacts run_sweep(const ExperimentConfig& config, SweepAxis axis,
                         const std::vector<Scalar>& values, bool adjusted_lr) {
    config.validate();
    if (values.empty()) throw ConfigError("sweep: no values given");
    auto dir = prepare_output_dir(config);
    SweepArtifacts artifacts;
    const long long epoch_budget =
        static_cast<long long>(config.train.local_epochs) * config.rounds;

    for (Scalar value : values) {
        SweepRow row;
        row.value = value;
        ExperimentConfig variant = config;
        const std::string label = to_string(axis) + "_" + format_scalar(value);
        try {
            switch (axis) {
                case SweepAxis::Mu:
                    variant.protocol.mu = value;
                    break;
                case SweepAxis::LocalEpochs: {
                    const auto epochs = static_cast<long long>(value);
                    if (epochs < 1 || static_cast<Scalar>(epochs) != value) {
                        throw ConfigError("sweep: local_epochs value must be a positive integer");
                    }
                    if (epoch_budget % epochs != 0) {
                        throw ConfigError("sweep: epoch budget " + std::to_string(epoch_budget) +
                                          " is not divisible by local_epochs " +
                                          std::to_string(epochs));
                    }
                    variant.train.local_epochs = static_cast<int>(epochs);
                    variant.rounds = static_cast<int>(epoch_budget / epochs);
                    break;
                }
                case SweepAxis::NumClients: {
                    const auto n = static_cast<int>(value);
                    if (n < 1 || static_cast<Scalar>(n) != value) {
                        throw ConfigError("sweep: num_clients value must be a positive integer");
                    }
                    variant.clients = n;
                    variant.clients_per_round = 0;
                    break;
                }
                case SweepAxis::BatchSize: {
                    const auto b = static_cast<Index>(value);
                    if (b < 1 || static_cast<Scalar>(b) != value) {
                        throw ConfigError("sweep: batch_size value must be a positive integer");
                    }
                    variant.train.batch_size = b;
                    if (adjusted_lr) {
                        variant.train.learning_rate =
                            (static_cast<Scalar>(b) * config.train.learning_rate) /
                            static_cast<Scalar>(config.train.batch_size);
                    }
                    break;
                }
            }
            variant.output_dir = (dir / label).string();
            variant.validate();
            row.learning_rate = variant.train.learning_rate;
            RunArtifacts run = run_experiment(variant);
            row.knn_accuracy = run.final_knn;
            row.probe_accuracy = run.final_probe;
            row.status = "ok";
        } catch (const std::exception& e) {
            row.learning_rate = variant.train.learning_rate;
            std::string message = e.what();
            for (char& c : message) {
                if (c == ',' || c == '\n') c = ';';
            }
            row.status = message;
        }
        artifacts.rows.push_back(row);
    }

    artifacts.csv_path = (dir / "sweep.csv").string();
    std::ofstream csv(artifacts.csv_path, std::ios::trunc);
    if (!csv) throw ConfigError("sweep: cannot write '" + artifacts.csv_path + "'");
    csv << "axis,value,learning_rate,knn_accuracy,probe_accuracy,status\n";
    for (const SweepRow& row : artifacts.rows) {
        csv << to_string(axis) << ',' << format_scalar(row.value) << ','
            << format_scalar(row.learning_rate) << ',';
        if (row.knn_accuracy) csv << format_scalar(*row.knn_accuracy);
        csv << ',';
        if (row.probe_accuracy) csv << format_scalar(*row.probe_accuracy);
        csv << ',' << row.status << '\n';
    }
    if (!csv) throw ConfigError("sweep: write to '" + artifacts.csv_path + "' failed");
    return artifacts;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& config, const std::string& checkpoint_path,
                               std::optional<Scalar> semi_fraction) {
    config.validate();
    ExperimentData data = build_dataset(config);
    MlpSpec encoder_spec = config.encoder_spec(data.train.dim());
    ParameterSet encoder = ParameterSet::load(checkpoint_path);
    require_mlp_params(encoder_spec, encoder, "eval checkpoint");
    EvalReport report;
    report.knn_accuracy = knn_eval(encoder_spec, encoder, data.train, data.test, config.eval);
    {
        Rng rng(derive_seed(config.seed, stream::kEval));
        report.probe_accuracy =
            linear_probe(encoder_spec, encoder, data.train, data.test, config.eval, rng);
    }
    if (semi_fraction) {
        Rng rng(derive_seed(config.seed, stream::kEval, 1));
        ParameterSet tuned = encoder.clone(false);
        report.finetune_accuracy = semi_supervised_finetune(encoder_spec, tuned, data.train,
                                                            data.test, *semi_fraction, config.eval,
                                                            rng);
    }
    return report;
}

PartitionReport inspect_partition(const ExperimentConfig& config) {
    config.validate();
    ExperimentData data = build_dataset(config);
    Partition partition = build_partition(config, data.train);
    PartitionReport report;
    report.class_counts = partition_class_counts(data.train, partition);
    for (const auto& rows : partition.client_indices) {
        report.sizes.push_back(static_cast<Index>(rows.size()));
    }
    return report;
}

}  // namespace fedu
