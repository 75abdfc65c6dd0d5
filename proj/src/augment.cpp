#include "fedu/augment.hpp"

#include "fedu/errors.hpp"

namespace fedu {

void AugmentationPolicy::validate() const {
    if (noise_sigma < 0) throw ConfigError("augment: noise_sigma must be >= 0");
    if (mask_prob < 0 || mask_prob > 1) throw ConfigError("augment: mask_prob must be in [0, 1]");
    if (scale_jitter < 0) throw ConfigError("augment: scale_jitter must be >= 0");
}

Vector augment_view(const Vector& x, const AugmentationPolicy& policy, Rng& rng) {
    Vector view = x;
    if (policy.scale_jitter > 0) {
        view *= Scalar(1) + rng.uniform(-policy.scale_jitter, policy.scale_jitter);
    }
    if (policy.noise_sigma > 0) {
        for (Index i = 0; i < view.size(); ++i) view[i] += policy.noise_sigma * rng.normal();
    }
    if (policy.mask_prob > 0) {
        for (Index i = 0; i < view.size(); ++i) {
            if (rng.uniform() < policy.mask_prob) view[i] = 0;
        }
    }
    return view;
}

std::pair<Vector, Vector> augment_pair(const Vector& x, const AugmentationPolicy& policy, Rng& rng) {
    Vector first = augment_view(x, policy, rng);
    Vector second = augment_view(x, policy, rng);
    return {std::move(first), std::move(second)};
}

}  // namespace fedu
