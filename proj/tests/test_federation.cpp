#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "fedu/federation.hpp"
#include "test_support.hpp"

using namespace fedu;

namespace {

struct Fixture {
    Dataset data;
    Partition partition;
    ServerState server;
    std::vector<ClientState> clients;
};

Fixture make_fixture(std::uint64_t seed, int num_clients = 4, int classes = 4,
                     Index per_class = 12) {
    Fixture f;
    Rng data_rng(derive_seed(seed, stream::kData));
    f.data = make_blobs(classes, 6, per_class, 3.0, data_rng);
    Rng part_rng(derive_seed(seed, stream::kPartition));
    f.partition = partition_noniid(f.data, num_clients, part_rng);
    const MlpSpec enc{{6, 10, 4}};
    auto [server, clients] = make_federation(f.data, f.partition, enc,
                                             default_predictor_spec(4), seed);
    f.server = std::move(server);
    f.clients = std::move(clients);
    return f;
}

const LocalTrainConfig kTrain{.local_epochs = 1, .batch_size = 8, .learning_rate = 0.05,
                              .ema_decay = 0.99, .symmetrized = false};
const AugmentationPolicy kAugment{};

RoundRecord one_round(Fixture& f, const ProtocolConfig& protocol, std::uint64_t seed,
                      int workers = 1, int per_round = 0) {
    const int k = per_round == 0 ? static_cast<int>(f.clients.size()) : per_round;
    return run_round(f.server, f.clients, {static_cast<int>(f.clients.size()), k}, kTrain,
                     kAugment, protocol, seed, workers);
}

}  // namespace

TEST_CASE("make_federation: every client starts from the global model") {
    Fixture f = make_fixture(1);
    for (const ClientState& c : f.clients) {
        CHECK(c.online.encoder.flatten_values() == f.server.global_encoder.flatten_values());
        CHECK(c.online.predictor.flatten_values() == f.server.global_predictor.flatten_values());
        CHECK(c.target.encoder.flatten_values() == c.online.encoder.flatten_values());
        CHECK(c.sample_count() == static_cast<Index>(c.partition.size()));
    }
    CHECK(!f.server.previous_global.has_value());
    CHECK(f.server.round == 0);
}

TEST_CASE("round 0 logs no divergence and no predictor decision, for every policy") {
    for (PredictorPolicy policy :
         {PredictorPolicy::AlwaysLocal, PredictorPolicy::AlwaysGlobal, PredictorPolicy::Dapu}) {
        Fixture f = make_fixture(2);
        ProtocolConfig protocol;
        protocol.predictor_policy = policy;
        RoundRecord record = one_round(f, protocol, 2);
        CHECK(record.round == 0);
        REQUIRE(record.clients.size() == f.clients.size());
        for (const auto& row : record.clients) {
            CHECK(!row.divergence.has_value());
            CHECK(!row.decision.has_value());
        }
    }
}

TEST_CASE("from round 1, DAPU decisions replay from the logged divergences") {
    Fixture f = make_fixture(3);
    ProtocolConfig protocol;
    protocol.predictor_policy = PredictorPolicy::Dapu;
    protocol.mu = 0.05;
    for (int r = 0; r < 4; ++r) {
        RoundRecord record = one_round(f, protocol, 3);
        for (const auto& row : record.clients) {
            if (r == 0) {
                CHECK(!row.decision.has_value());
            } else {
                REQUIRE(row.divergence.has_value());
                REQUIRE(row.decision.has_value());
                CHECK(*row.decision == dapu_decide(*row.divergence, protocol.mu));
                CHECK(*row.divergence >= 0.0);
            }
        }
    }
}

TEST_CASE("metrics rows: one per selected client, ids ascending") {
    Fixture f = make_fixture(4);
    RoundRecord record = one_round(f, {}, 4, 1, 2);
    CHECK(record.clients.size() == 2);
    CHECK(record.selected.size() == 2);
    CHECK(std::is_sorted(record.selected.begin(), record.selected.end()));
    for (std::size_t i = 0; i < record.clients.size(); ++i) {
        CHECK(record.clients[i].client_id == record.selected[i]);
    }
}

TEST_CASE("update stage: (Online, AlwaysGlobal) overwrites encoder and predictor bitwise") {
    Fixture f = make_fixture(5);
    ProtocolConfig protocol;
    protocol.predictor_policy = PredictorPolicy::AlwaysGlobal;
    one_round(f, protocol, 5);  // round 0 trains and aggregates

    // Entering round 1, the update stage must overwrite the online encoder and
    // predictor with the (fresh) global model.
    const Vector global_enc = f.server.global_encoder.flatten_values();
    const Vector global_pred = f.server.global_predictor.flatten_values();
    std::vector<ClientState*> selected;
    for (auto& c : f.clients) selected.push_back(&c);
    update_clients(f.server, selected, protocol);
    for (const ClientState& c : f.clients) {
        CHECK(c.online.encoder.flatten_values() == global_enc);
        CHECK(c.online.predictor.flatten_values() == global_pred);
    }
}

TEST_CASE("update stage: update_target=Target refreshes only the target branch") {
    Fixture f = make_fixture(6);
    ProtocolConfig protocol;
    protocol.update_target = UpdateTarget::Target;
    protocol.predictor_policy = PredictorPolicy::AlwaysLocal;
    one_round(f, protocol, 6);

    std::vector<Vector> online_before;
    for (const auto& c : f.clients) online_before.push_back(c.online.encoder.flatten_values());
    const Vector global_enc = f.server.global_encoder.flatten_values();

    std::vector<ClientState*> selected;
    for (auto& c : f.clients) selected.push_back(&c);
    update_clients(f.server, selected, protocol);
    for (std::size_t i = 0; i < f.clients.size(); ++i) {
        CHECK(f.clients[i].online.encoder.flatten_values() == online_before[i]);
        CHECK(f.clients[i].target.encoder.flatten_values() == global_enc);
    }
}

TEST_CASE("update stage: update_target=Both refreshes both branches") {
    Fixture f = make_fixture(7);
    ProtocolConfig protocol;
    protocol.update_target = UpdateTarget::Both;
    protocol.predictor_policy = PredictorPolicy::AlwaysLocal;
    one_round(f, protocol, 7);

    std::vector<ClientState*> selected;
    for (auto& c : f.clients) selected.push_back(&c);
    update_clients(f.server, selected, protocol);
    const Vector global_enc = f.server.global_encoder.flatten_values();
    for (const ClientState& c : f.clients) {
        CHECK(c.online.encoder.flatten_values() == global_enc);
        CHECK(c.target.encoder.flatten_values() == global_enc);
    }
}

TEST_CASE("with update_target=Online and m=1, the server never touches target encoders") {
    Fixture f = make_fixture(8);
    std::vector<Vector> target_at_start;
    for (const auto& c : f.clients) target_at_start.push_back(c.target.encoder.flatten_values());

    ProtocolConfig protocol;  // update_target = Online
    LocalTrainConfig train = kTrain;
    train.ema_decay = 1.0;  // freeze the EMA so any change must come from the server
    for (int r = 0; r < 3; ++r) {
        run_round(f.server, f.clients, {static_cast<int>(f.clients.size()),
                                        static_cast<int>(f.clients.size())},
                  train, kAugment, protocol, 8, 1);
    }
    for (std::size_t i = 0; i < f.clients.size(); ++i) {
        CHECK(f.clients[i].target.encoder.flatten_values() == target_at_start[i]);
    }
}

TEST_CASE("aggregation uses data-volume weights over the selected subset") {
    // Hand-built unequal partition (16 vs 32 rows -> weights 1/3 and 2/3).
    // After a round, the global encoder must equal sum over selected clients of
    // (n_k / n) * theta_k, computed from the clients' post-training parameters.
    Rng data_rng(derive_seed(9, stream::kData));
    Fixture f;
    f.data = make_blobs(4, 6, 12, 3.0, data_rng);
    f.partition.client_indices.resize(2);
    for (Index i = 0; i < 16; ++i) f.partition.client_indices[0].push_back(i);
    for (Index i = 16; i < 48; ++i) f.partition.client_indices[1].push_back(i);
    auto [server, clients] =
        make_federation(f.data, f.partition, MlpSpec{{6, 10, 4}}, default_predictor_spec(4), 9);
    f.server = std::move(server);
    f.clients = std::move(clients);

    one_round(f, {}, 9);

    Index total = 0;
    for (const auto& c : f.clients) total += c.sample_count();
    std::vector<const ParameterSet*> models;
    std::vector<Scalar> weights;
    for (const auto& c : f.clients) {
        models.push_back(&c.online.encoder);
        weights.push_back(static_cast<Scalar>(c.sample_count()) / static_cast<Scalar>(total));
    }
    CHECK(weights[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto expected = testing::ref_aggregate(models, weights);
    for (std::size_t e = 0; e < f.server.global_encoder.size(); ++e) {
        CHECK((f.server.global_encoder.tensor(e).value() - expected[e]).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("previous_global snapshots the encoder distributed this round") {
    Fixture f = make_fixture(10);
    const Vector distributed = f.server.global_encoder.flatten_values();
    one_round(f, {}, 10);
    REQUIRE(f.server.previous_global.has_value());
    CHECK(f.server.previous_global->flatten_values() == distributed);
    CHECK(f.server.round == 1);
}

TEST_CASE("symmetry: identical data and a shared stream make aggregation a no-op") {
    // Two clients with the same samples, same initial model, and the same RNG
    // stream produce bitwise-equal uploads; aggregating them returns the same
    // values again.
    Rng data_rng(1);
    Dataset blobs = make_blobs(2, 6, 10, 3.0, data_rng);
    Rng init_rng(2);
    OnlineNetwork a = make_online_network(MlpSpec{{6, 10, 4}}, default_predictor_spec(4), init_rng);
    OnlineNetwork b;
    b.encoder_spec = a.encoder_spec;
    b.predictor_spec = a.predictor_spec;
    b.encoder = a.encoder.clone();
    b.predictor = a.predictor.clone();
    TargetNetwork ta = make_target_from(a);
    TargetNetwork tb = make_target_from(b);

    Rng ra(77), rb(77);
    local_train(a, ta, blobs.features, kTrain, kAugment, ra);
    local_train(b, tb, blobs.features, kTrain, kAugment, rb);
    CHECK(a.encoder.flatten_values() == b.encoder.flatten_values());

    ParameterSet merged = aggregate({&a.encoder, &b.encoder}, {0.5, 0.5});
    CHECK(merged.flatten_values() == a.encoder.flatten_values());
}

TEST_CASE("run_training: zero rounds returns the initialized global model") {
    Fixture f = make_fixture(11);
    const Vector initial = f.server.global_encoder.flatten_values();
    run_training(f.server, f.clients, 0, {4, 4}, kTrain, kAugment, {}, 11, 1);
    CHECK(f.server.global_encoder.flatten_values() == initial);
    CHECK(f.server.round == 0);
}

TEST_CASE("run_training: same master seed twice replays bitwise, any worker count") {
    auto run = [](int workers) {
        Fixture f = make_fixture(12);
        std::vector<RoundRecord> records;
        run_training(f.server, f.clients, 3, {4, 4}, kTrain, kAugment, {}, 12, workers,
                     [&](const RoundRecord& r) { records.push_back(r); });
        return std::pair{f.server.global_encoder.flatten_values(), records};
    };
    const auto [enc1, rec1] = run(1);
    const auto [enc2, rec2] = run(4);
    CHECK(enc1 == enc2);
    REQUIRE(rec1.size() == rec2.size());
    for (std::size_t r = 0; r < rec1.size(); ++r) {
        REQUIRE(rec1[r].clients.size() == rec2[r].clients.size());
        for (std::size_t c = 0; c < rec1[r].clients.size(); ++c) {
            CHECK(rec1[r].clients[c].mean_loss == rec2[r].clients[c].mean_loss);
            CHECK(rec1[r].clients[c].divergence == rec2[r].clients[c].divergence);
            CHECK(rec1[r].clients[c].decision == rec2[r].clients[c].decision);
        }
    }
}

TEST_CASE("client selection: K of N clients per round, permutation-based") {
    Fixture f = make_fixture(13);
    RoundRecord record = one_round(f, {}, 13, 1, 2);
    CHECK(record.selected.size() == 2);
    for (int id : record.selected) {
        CHECK(id >= 0);
        CHECK(id < 4);
    }
    CHECK_THROWS_AS((SelectionConfig{4, 5}.validate()), ConfigError);
    CHECK_THROWS_AS((SelectionConfig{4, 0}.validate()), ConfigError);
}

TEST_CASE("aggregate_source=Target averages the target branch instead") {
    Fixture f = make_fixture(14);
    ProtocolConfig protocol;
    protocol.aggregate_source = AggregateSource::Target;
    protocol.predictor_policy = PredictorPolicy::AlwaysLocal;
    one_round(f, protocol, 14);

    Index total = 0;
    for (const auto& c : f.clients) total += c.sample_count();
    std::vector<const ParameterSet*> models;
    std::vector<Scalar> weights;
    for (const auto& c : f.clients) {
        models.push_back(&c.target.encoder);
        weights.push_back(static_cast<Scalar>(c.sample_count()) / static_cast<Scalar>(total));
    }
    const auto expected = testing::ref_aggregate(models, weights);
    for (std::size_t e = 0; e < f.server.global_encoder.size(); ++e) {
        CHECK((f.server.global_encoder.tensor(e).value() - expected[e]).cwiseAbs().maxCoeff() <
              1e-12);
    }
}
