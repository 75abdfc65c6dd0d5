#pragma once

#include <functional>
#include <optional>

#include "fedu/partition.hpp"
#include "fedu/protocol.hpp"
#include "fedu/siamese.hpp"

namespace fedu {

struct SelectionConfig {
    int total_clients = 5;
    int per_round = 5;

    void validate() const;
};

struct ClientState {
    int id = 0;
    std::vector<Index> partition;  // rows of the training dataset
    Matrix samples;                // gathered rows, in partition order
    OnlineNetwork online;
    TargetNetwork target;

    Index sample_count() const { return samples.rows(); }
};

struct ServerState {
    MlpSpec encoder_spec;
    MlpSpec predictor_spec;
    ParameterSet global_encoder;    // distributed at the start of the current round
    ParameterSet global_predictor;
    // Encoder distributed in the previous round; the divergence reference.
    std::optional<ParameterSet> previous_global;
    int round = 0;
};

struct ClientRoundRecord {
    int client_id = 0;
    Scalar mean_loss = 0;
    // Squared L2 distance between the client encoder entering this round and
    // the encoder distributed last round; absent in round 0.
    std::optional<Scalar> divergence;
    std::optional<PredictorDecision> decision;
    double wall_ms = 0;
};

struct RoundRecord {
    int round = 0;
    std::vector<int> selected;  // ascending client ids
    std::vector<ClientRoundRecord> clients;

    Scalar mean_loss() const;
    std::optional<Scalar> mean_divergence() const;
};

// Global model initialized from the server stream (encoder then predictor);
// every client starts from a copy of it, with the target encoder copied from
// the client's online encoder.
std::pair<ServerState, std::vector<ClientState>> make_federation(
    const Dataset& data, const Partition& partition, const MlpSpec& encoder_spec,
    const MlpSpec& predictor_spec, std::uint64_t master_seed);

// RNG stream for one client's local training in one round.
Rng client_train_rng(std::uint64_t master_seed, int client_id, int round);

struct ClientUpdateInfo {
    std::optional<Scalar> divergence;
    std::optional<PredictorDecision> decision;
};

// Start-of-round model update for the selected clients: measures divergence
// against the previously distributed encoder, overwrites the branch chosen by
// update_target with the current global encoder, and applies the predictor
// policy. In round 0 there is no previous global, so no divergence is
// measured and every policy leaves the predictor alone.
std::vector<ClientUpdateInfo> update_clients(ServerState& server,
                                             std::vector<ClientState*>& selected,
                                             const ProtocolConfig& protocol);

// One protocol round: select clients, update them, run local training (at
// most `workers` clients concurrently), record metrics, aggregate the chosen
// branch into the new global model, advance the round counter.
RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                      const SelectionConfig& selection, const LocalTrainConfig& train,
                      const AugmentationPolicy& augment, const ProtocolConfig& protocol,
                      std::uint64_t master_seed, int workers);

// Runs `rounds` rounds; `on_round` (optional) observes each RoundRecord.
void run_training(ServerState& server, std::vector<ClientState>& clients, int rounds,
                  const SelectionConfig& selection, const LocalTrainConfig& train,
                  const AugmentationPolicy& augment, const ProtocolConfig& protocol,
                  std::uint64_t master_seed, int workers,
                  const std::function<void(const RoundRecord&)>& on_round = {});

}  // namespace fedu
