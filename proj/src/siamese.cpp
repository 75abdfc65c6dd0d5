#include "fedu/siamese.hpp"

#include <numeric>

#include "fedu/errors.hpp"

namespace fedu {

void OnlineNetwork::validate() const {
    encoder_spec.validate();
    predictor_spec.validate();
    if (predictor_spec.input_dim() != encoder_spec.output_dim() ||
        predictor_spec.output_dim() != encoder_spec.output_dim()) {
        throw ContractError("online network: predictor must map representation dim " +
                            std::to_string(encoder_spec.output_dim()) + " to itself, got " +
                            std::to_string(predictor_spec.input_dim()) + " -> " +
                            std::to_string(predictor_spec.output_dim()));
    }
}

MlpSpec default_predictor_spec(Index rep_dim) { return MlpSpec{{rep_dim, 2 * rep_dim, rep_dim}}; }

OnlineNetwork make_online_network(const MlpSpec& encoder_spec, const MlpSpec& predictor_spec,
                                  Rng& rng) {
    OnlineNetwork online;
    online.encoder_spec = encoder_spec;
    online.predictor_spec = predictor_spec;
    online.encoder = init_mlp(encoder_spec, rng, true);
    online.predictor = init_mlp(predictor_spec, rng, true);
    online.validate();
    return online;
}

TargetNetwork make_target_from(const OnlineNetwork& online) {
    TargetNetwork target;
    target.encoder_spec = online.encoder_spec;
    target.encoder = online.encoder.clone(false);
    return target;
}

void LocalTrainConfig::validate() const {
    if (local_epochs < 0) throw ConfigError("local_train: local_epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("local_train: batch_size must be >= 1");
    if (learning_rate < 0) throw ConfigError("local_train: learning_rate must be >= 0");
    if (ema_decay < 0 || ema_decay > 1) throw ConfigError("local_train: ema_decay must be in [0, 1]");
}

Scalar LocalTrainStats::mean_loss() const {
    if (batch_losses.empty()) return 0;
    Scalar total = std::accumulate(batch_losses.begin(), batch_losses.end(), Scalar(0));
    return total / static_cast<Scalar>(batch_losses.size());
}

Tensor forward_loss(const OnlineNetwork& online, const TargetNetwork& target,
                    const Matrix& view_online, const Matrix& view_target, bool symmetrized) {
    auto one_side = [&](const Matrix& vo, const Matrix& vt) {
        Tensor prediction = mlp_forward(online.predictor_spec, online.predictor,
                                        mlp_forward(online.encoder_spec, online.encoder,
                                                    Tensor::from_matrix(vo)));
        Tensor target_proj =
            mlp_forward(target.encoder_spec, target.encoder, Tensor::from_matrix(vt));
        return contrastive_loss(l2_normalize(prediction), l2_normalize(target_proj).detach());
    };
    Tensor loss = one_side(view_online, view_target);
    if (symmetrized) {
        loss = scale(add(loss, one_side(view_target, view_online)), Scalar(0.5));
    }
    return loss;
}

void ema_update(ParameterSet& target, const ParameterSet& online, Scalar decay) {
    if (decay < 0 || decay > 1) throw ContractError("ema_update: decay must be in [0, 1]");
    ParameterSet::require_congruent(target, online, "ema_update");
    for (std::size_t i = 0; i < target.size(); ++i) {
        Vector& xi = target.tensor(i).value();
        xi = decay * xi + (Scalar(1) - decay) * online.tensor(i).value();
    }
}

LocalTrainStats local_train(OnlineNetwork& online, TargetNetwork& target, const Matrix& samples,
                            const LocalTrainConfig& config, const AugmentationPolicy& policy,
                            Rng& rng) {
    config.validate();
    policy.validate();
    online.validate();
    if (samples.rows() == 0) throw ConfigError("local_train: empty sample set");
    if (samples.cols() != online.encoder_spec.input_dim()) {
        throw DimensionError("local_train: samples have " + std::to_string(samples.cols()) +
                             " features, encoder expects " +
                             std::to_string(online.encoder_spec.input_dim()));
    }
    SgdConfig sgd{config.learning_rate};
    LocalTrainStats stats;
    const Index n = samples.rows();
    for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
        std::vector<Index> order = rng.permutation(n);
        Scalar epoch_total = 0;
        Index epoch_batches = 0;
        for (Index start = 0; start < n; start += config.batch_size) {
            const Index b = std::min(config.batch_size, n - start);
            Matrix view_online(b, samples.cols());
            Matrix view_target(b, samples.cols());
            for (Index i = 0; i < b; ++i) {
                Vector sample = samples.row(order[static_cast<std::size_t>(start + i)]).transpose();
                auto [first, second] = augment_pair(sample, policy, rng);
                view_online.row(i) = first.transpose();
                view_target.row(i) = second.transpose();
            }
            Tensor loss = forward_loss(online, target, view_online, view_target, config.symmetrized);
            backward(loss);
            sgd_step(online.encoder, sgd);
            sgd_step(online.predictor, sgd);
            ++stats.sgd_steps;
            ema_update(target.encoder, online.encoder, config.ema_decay);
            ++stats.ema_steps;
            stats.batch_losses.push_back(loss.scalar_value());
            epoch_total += loss.scalar_value();
            ++epoch_batches;
        }
        stats.epoch_mean_losses.push_back(epoch_total / static_cast<Scalar>(epoch_batches));
    }
    return stats;
}

}  // namespace fedu
