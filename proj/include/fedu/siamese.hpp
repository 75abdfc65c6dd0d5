#pragma once

#include "fedu/augment.hpp"
#include "fedu/mlp.hpp"
#include "fedu/sgd.hpp"

namespace fedu {

// Gradient-trained branch: encoder plus prediction head. The predictor maps
// representation space to itself.
struct OnlineNetwork {
    MlpSpec encoder_spec;
    MlpSpec predictor_spec;
    ParameterSet encoder;
    ParameterSet predictor;

    void validate() const;
};

// Momentum branch: encoder only, never touched by gradient steps.
struct TargetNetwork {
    MlpSpec encoder_spec;
    ParameterSet encoder;
};

// [rep_dim, 2 * rep_dim, rep_dim]
MlpSpec default_predictor_spec(Index rep_dim);

// Online branch initialized from `rng` (encoder first, then predictor); the
// target encoder starts as a copy of the online encoder.
OnlineNetwork make_online_network(const MlpSpec& encoder_spec, const MlpSpec& predictor_spec,
                                  Rng& rng);
TargetNetwork make_target_from(const OnlineNetwork& online);

struct LocalTrainConfig {
    int local_epochs = 1;
    Index batch_size = 128;
    Scalar learning_rate = 0.032;
    Scalar ema_decay = 0.99;
    bool symmetrized = false;

    void validate() const;
};

struct LocalTrainStats {
    std::vector<Scalar> batch_losses;
    std::vector<Scalar> epoch_mean_losses;
    long sgd_steps = 0;
    long ema_steps = 0;

    // Unweighted mean over batch losses of the whole call.
    Scalar mean_loss() const;
};

// Prediction-vs-momentum-target loss on one batch of paired views. The target
// branch output is detached, so no gradient ever reaches the target encoder.
// With `symmetrized` both view assignments are averaged.
Tensor forward_loss(const OnlineNetwork& online, const TargetNetwork& target,
                    const Matrix& view_online, const Matrix& view_target, bool symmetrized = false);

// xi = decay * xi + (1 - decay) * theta, elementwise over congruent sets.
void ema_update(ParameterSet& target, const ParameterSet& online, Scalar decay);

// Runs local_epochs epochs of shuffled minibatches (last short batch kept).
// Per batch: fresh augmented views, forward, backward, one SGD step on
// encoder+predictor, then one EMA step on the target encoder. All stochastic
// choices come from `rng`.
LocalTrainStats local_train(OnlineNetwork& online, TargetNetwork& target, const Matrix& samples,
                            const LocalTrainConfig& config, const AugmentationPolicy& policy,
                            Rng& rng);

}  // namespace fedu
