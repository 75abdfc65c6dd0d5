#include "fedu/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "fedu/errors.hpp"

namespace fedu {

void SelectionConfig::validate() const {
    if (total_clients < 1) throw ConfigError("selection: total_clients must be >= 1");
    if (per_round < 1 || per_round > total_clients) {
        throw ConfigError("selection: per_round must be in [1, total_clients]");
    }
}

Scalar RoundRecord::mean_loss() const {
    if (clients.empty()) return 0;
    Scalar total = 0;
    for (const auto& c : clients) total += c.mean_loss;
    return total / static_cast<Scalar>(clients.size());
}

std::optional<Scalar> RoundRecord::mean_divergence() const {
    Scalar total = 0;
    int n = 0;
    for (const auto& c : clients) {
        if (c.divergence) {
            total += *c.divergence;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return total / static_cast<Scalar>(n);
}

std::pair<ServerState, std::vector<ClientState>> make_federation(
    const Dataset& data, const Partition& partition, const MlpSpec& encoder_spec,
    const MlpSpec& predictor_spec, std::uint64_t master_seed) {
    partition.validate(data);
    if (data.dim() != encoder_spec.input_dim()) {
        throw ConfigError("federation: dataset dim " + std::to_string(data.dim()) +
                          " does not match encoder input dim " +
                          std::to_string(encoder_spec.input_dim()));
    }
    ServerState server;
    server.encoder_spec = encoder_spec;
    server.predictor_spec = predictor_spec;
    Rng init_rng(derive_seed(master_seed, stream::kServerInit));
    server.global_encoder = init_mlp(encoder_spec, init_rng, false);
    server.global_predictor = init_mlp(predictor_spec, init_rng, false);

    std::vector<ClientState> clients;
    clients.reserve(partition.client_indices.size());
    for (std::size_t k = 0; k < partition.client_indices.size(); ++k) {
        ClientState client;
        client.id = static_cast<int>(k);
        client.partition = partition.client_indices[k];
        client.samples = gather_rows(data, client.partition);
        client.online.encoder_spec = encoder_spec;
        client.online.predictor_spec = predictor_spec;
        client.online.encoder = server.global_encoder.clone(true);
        client.online.predictor = server.global_predictor.clone(true);
        client.online.validate();
        client.target = make_target_from(client.online);
        clients.push_back(std::move(client));
    }
    return {std::move(server), std::move(clients)};
}

Rng client_train_rng(std::uint64_t master_seed, int client_id, int round) {
    return Rng(derive_seed(derive_seed(master_seed, stream::kClientTrain,
                                       static_cast<std::uint64_t>(client_id)),
                           static_cast<std::uint64_t>(round)));
}

std::vector<ClientUpdateInfo> update_clients(ServerState& server,
                                             std::vector<ClientState*>& selected,
                                             const ProtocolConfig& protocol) {
    protocol.validate();
    std::vector<ClientUpdateInfo> infos;
    infos.reserve(selected.size());
    for (ClientState* client : selected) {
        ClientUpdateInfo info;
        if (server.previous_global) {
            info.divergence = divergence(client->online.encoder, *server.previous_global);
            switch (protocol.predictor_policy) {
                case PredictorPolicy::AlwaysLocal:
                    info.decision = PredictorDecision::KeepLocal;
                    break;
                case PredictorPolicy::AlwaysGlobal:
                    info.decision = PredictorDecision::UseGlobal;
                    break;
                case PredictorPolicy::Dapu:
                    info.decision = dapu_decide(*info.divergence, protocol.mu);
                    break;
            }
        }
        if (protocol.update_target == UpdateTarget::Online ||
            protocol.update_target == UpdateTarget::Both) {
            client->online.encoder.copy_values_from(server.global_encoder);
        }
        if (protocol.update_target == UpdateTarget::Target ||
            protocol.update_target == UpdateTarget::Both) {
            client->target.encoder.copy_values_from(server.global_encoder);
        }
        if (info.decision == PredictorDecision::UseGlobal) {
            client->online.predictor.copy_values_from(server.global_predictor);
        }
        infos.push_back(std::move(info));
    }
    return infos;
}

RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                      const SelectionConfig& selection, const LocalTrainConfig& train,
                      const AugmentationPolicy& augment, const ProtocolConfig& protocol,
                      std::uint64_t master_seed, int workers) {
    selection.validate();
    train.validate();
    augment.validate();
    protocol.validate();
    if (workers < 1) throw ConfigError("run_round: workers must be >= 1");
    if (static_cast<int>(clients.size()) != selection.total_clients) {
        throw ConfigError("run_round: " + std::to_string(clients.size()) + " clients but " +
                          std::to_string(selection.total_clients) + " configured");
    }

    // Selection: uniform without replacement, processed in ascending id order.
    Rng select_rng(derive_seed(master_seed, stream::kSelection,
                               static_cast<std::uint64_t>(server.round)));
    std::vector<Index> order = select_rng.permutation(static_cast<Index>(clients.size()));
    std::vector<int> selected_ids;
    for (int i = 0; i < selection.per_round; ++i) {
        selected_ids.push_back(static_cast<int>(order[static_cast<std::size_t>(i)]));
    }
    std::sort(selected_ids.begin(), selected_ids.end());
    std::vector<ClientState*> selected;
    for (int id : selected_ids) selected.push_back(&clients[static_cast<std::size_t>(id)]);

    std::vector<ClientUpdateInfo> updates = update_clients(server, selected, protocol);

    // Local training, at most `workers` clients at a time. Each client's RNG
    // stream depends on (master seed, client id, round) only, so scheduling
    // cannot change any result.
    std::vector<LocalTrainStats> stats(selected.size());
    std::vector<double> wall_ms(selected.size(), 0.0);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= selected.size()) break;
            try {
                ClientState& client = *selected[i];
                Rng rng = client_train_rng(master_seed, client.id, server.round);
                const auto start = std::chrono::steady_clock::now();
                stats[i] = local_train(client.online, client.target, client.samples, train,
                                       augment, rng);
                const auto stop = std::chrono::steady_clock::now();
                wall_ms[i] = std::chrono::duration<double, std::milli>(stop - start).count();
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int thread_count = std::min<int>(workers, static_cast<int>(selected.size()));
    if (thread_count <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < thread_count; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    RoundRecord record;
    record.round = server.round;
    record.selected = selected_ids;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        ClientRoundRecord row;
        row.client_id = selected[i]->id;
        row.mean_loss = stats[i].mean_loss();
        row.divergence = updates[i].divergence;
        row.decision = updates[i].decision;
        row.wall_ms = wall_ms[i];
        record.clients.push_back(row);
    }

    // Aggregate the configured branch, weighted by client sample counts.
    Scalar total_samples = 0;
    for (const ClientState* c : selected) total_samples += static_cast<Scalar>(c->sample_count());
    std::vector<Scalar> weights;
    std::vector<const ParameterSet*> encoders;
    std::vector<const ParameterSet*> predictors;
    for (const ClientState* c : selected) {
        weights.push_back(static_cast<Scalar>(c->sample_count()) / total_samples);
        encoders.push_back(protocol.aggregate_source == AggregateSource::Online
                               ? &c->online.encoder
                               : &c->target.encoder);
        predictors.push_back(&c->online.predictor);
    }
    ParameterSet new_encoder = aggregate(encoders, weights);
    ParameterSet new_predictor = aggregate(predictors, weights);
    server.previous_global = std::move(server.global_encoder);
    server.global_encoder = std::move(new_encoder);
    server.global_predictor = std::move(new_predictor);
    server.round += 1;
    return record;
}

void run_training(ServerState& server, std::vector<ClientState>& clients, int rounds,
                  const SelectionConfig& selection, const LocalTrainConfig& train,
                  const AugmentationPolicy& augment, const ProtocolConfig& protocol,
                  std::uint64_t master_seed, int workers,
                  const std::function<void(const RoundRecord&)>& on_round) {
    if (rounds < 0) throw ConfigError("run_training: rounds must be >= 0");
    for (int r = 0; r < rounds; ++r) {
        RoundRecord record =
            run_round(server, clients, selection, train, augment, protocol, master_seed, workers);
        if (on_round) on_round(record);
    }
}

}  // namespace fedu
