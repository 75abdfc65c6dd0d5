#pragma once

#include <optional>

#include "fedu/config.hpp"
#include "fedu/federation.hpp"

namespace fedu {

// Train/test pair assembled per the config's dataset block, fully determined
// by the config (blobs draw from the master seed's data stream).
struct ExperimentData {
    Dataset train;
    Dataset test;
};

ExperimentData build_dataset(const ExperimentConfig& config);

Partition build_partition(const ExperimentConfig& config, const Dataset& train);

struct RunArtifacts {
    std::string output_dir;
    std::string metrics_path;
    std::string summary_path;
    std::string config_echo_path;
    std::vector<std::string> checkpoint_paths;
    Scalar final_knn = 0;
    Scalar final_probe = 0;
    int rounds_completed = 0;
    double wall_ms = 0;
};

// Full federated run: dataset, partition, training rounds, metrics JSONL,
// checkpoints, final kNN + probe evaluation, summary JSON.
RunArtifacts run_experiment(const ExperimentConfig& config);

// Per-client independent training for rounds * local_epochs epochs each (no
// aggregation, no model updates); final_knn is the mean over clients.
RunArtifacts run_single_client_baseline(const ExperimentConfig& config);

// Same pipeline as run_experiment with the federation collapsed to a single
// client holding the undivided dataset.
RunArtifacts run_centralized_baseline(const ExperimentConfig& config);

enum class SweepAxis { Mu, LocalEpochs, NumClients, BatchSize };

SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepRow {
    Scalar value = 0;
    Scalar learning_rate = 0;
    std::optional<Scalar> knn_accuracy;
    std::optional<Scalar> probe_accuracy;
    std::string status;  // "ok" or the error message
};

struct SweepArtifacts {
    std::string csv_path;
    std::vector<SweepRow> rows;
};

// One run per value; a failing run marks its row and the sweep continues.
// The local-epochs axis holds local_epochs * rounds fixed at the base
// config's budget; the batch-size axis can rescale the learning rate as
// lr = (batch * base_lr) / base_batch.
SweepArtifacts run_sweep(const ExperimentConfig& config, SweepAxis axis,
                         const std::vector<Scalar>& values, bool adjusted_lr);

struct EvalReport {
    Scalar knn_accuracy = 0;
    Scalar probe_accuracy = 0;
    std::optional<Scalar> finetune_accuracy;
};

// Evaluates a saved encoder checkpoint against the config's dataset; the
// checkpoint must be congruent with the config's encoder architecture.
EvalReport evaluate_checkpoint(const ExperimentConfig& config, const std::string& checkpoint_path,
                               std::optional<Scalar> semi_fraction = std::nullopt);

struct PartitionReport {
    std::vector<std::vector<Index>> class_counts;  // [client][class]
    std::vector<Index> sizes;
};

PartitionReport inspect_partition(const ExperimentConfig& config);

}  // namespace fedu
