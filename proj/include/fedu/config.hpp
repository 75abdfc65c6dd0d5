#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedu/augment.hpp"
#include "fedu/eval.hpp"
#include "fedu/protocol.hpp"
#include "fedu/siamese.hpp"

namespace fedu {

enum class DatasetKind { Blobs, Cifar10 };
enum class PartitionScheme { Iid, NonIid };

// Fully resolved experiment description. Parsed from a flat `key = value`
// text file (one pair per line, `#` comments); unknown keys are errors, as
// are malformed values. The full key reference lives in docs/config.md.
struct ExperimentConfig {
    DatasetKind dataset = DatasetKind::Blobs;

    int blobs_classes = 10;
    Index blobs_dim = 16;
    Index blobs_train_per_class = 100;
    Index blobs_test_per_class = 20;
    Scalar blobs_separation = 3.0;

    std::string cifar_path;
    std::string cifar_test_path;          // empty: use holdout_per_class
    Index cifar_holdout_per_class = 0;    // used when test_path is empty
    int cifar_downsample = 1;
    std::vector<int> cifar_keep_classes;  // empty: keep all

    PartitionScheme partition = PartitionScheme::NonIid;
    int clients = 5;
    int clients_per_round = 0;  // 0: all clients every round

    std::vector<Index> encoder_hidden = {32};
    Index encoder_out = 16;
    std::vector<Index> predictor_hidden;  // empty: [2 * encoder_out]

    int rounds = 50;
    LocalTrainConfig train{.local_epochs = 1, .batch_size = 32, .learning_rate = 0.032,
                           .ema_decay = 0.99, .symmetrized = false};
    AugmentationPolicy augment;
    ProtocolConfig protocol;

    EvalConfig eval;
    int eval_interval = 0;        // 0: evaluate only after the final round
    int checkpoint_interval = 0;  // 0: checkpoint only the final model

    std::uint64_t seed = 1;
    std::string output_dir;  // empty: $FEDU_OUTPUT_DIR, then "fedu_out"
    int workers = 1;
    bool log_timing = false;

    MlpSpec encoder_spec(Index input_dim) const;
    MlpSpec predictor_spec() const;
    int effective_clients_per_round() const;

    void validate() const;

    // Canonical echo of every resolved key; parsing it back reproduces this
    // config exactly.
    std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);
void write_config_file(const ExperimentConfig& config, const std::string& path);

// Output directory resolution: explicit value, else $FEDU_OUTPUT_DIR, else
// "fedu_out".
std::string resolve_output_dir(const ExperimentConfig& config);

inline constexpr const char* kOutputDirEnvVar = "FEDU_OUTPUT_DIR";

}  // namespace fedu
