#pragma once

#include <utility>

#include "fedu/rng.hpp"
#include "fedu/types.hpp"

namespace fedu {

// Stochastic view generation for plain feature vectors. Per view, in this
// order: (1) one multiplicative jitter factor 1 + uniform(-scale_jitter,
// +scale_jitter) applied to the whole vector, (2) additive N(0, noise_sigma^2)
// per coordinate, (3) each coordinate zeroed with probability mask_prob.
// A knob set to 0 skips its stage (and its RNG draws) entirely, so with all
// knobs at 0 both views equal the input bitwise.
struct AugmentationPolicy {
    Scalar noise_sigma = 0.1;
    Scalar mask_prob = 0.1;
    Scalar scale_jitter = 0.1;

    void validate() const;
};

Vector augment_view(const Vector& x, const AugmentationPolicy& policy, Rng& rng);

// Two independent views; the first view's draws all precede the second's.
std::pair<Vector, Vector> augment_pair(const Vector& x, const AugmentationPolicy& policy, Rng& rng);

}  // namespace fedu
