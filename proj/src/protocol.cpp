#include "fedu/protocol.hpp"

#include <cmath>

#include "fedu/errors.hpp"

namespace fedu {

std::string to_string(AggregateSource v) {
    return v == AggregateSource::Online ? "online" : "target";
}

std::string to_string(UpdateTarget v) {
    switch (v) {
        case UpdateTarget::Online: return "online";
        case UpdateTarget::Target: return "target";
        default: return "both";
    }
}

std::string to_string(PredictorPolicy v) {
    switch (v) {
        case PredictorPolicy::AlwaysLocal: return "local";
        case PredictorPolicy::AlwaysGlobal: return "global";
        default: return "dapu";
    }
}

std::string to_string(PredictorDecision v) {
    return v == PredictorDecision::KeepLocal ? "local" : "global";
}

void ProtocolConfig::validate() const {
    if (predictor_policy == PredictorPolicy::Dapu && !(mu > 0)) {
        throw ConfigError("protocol: mu must be > 0 for the divergence-aware predictor policy");
    }
}

ParameterSet aggregate(const std::vector<const ParameterSet*>& models,
                       const std::vector<Scalar>& weights) {
    if (models.empty()) throw ContractError("aggregate: no models given");
    if (models.size() != weights.size()) {
        throw ContractError("aggregate: " + std::to_string(models.size()) + " models but " +
                            std::to_string(weights.size()) + " weights");
    }
    Scalar weight_sum = 0;
    for (Scalar w : weights) {
        if (w < 0 || !std::isfinite(w)) throw ContractError("aggregate: weights must be non-negative");
        weight_sum += w;
    }
    if (std::abs(weight_sum - Scalar(1)) > kWeightSumTolerance) {
        throw ContractError("aggregate: weights sum to " + std::to_string(weight_sum) +
                            ", expected 1 within " + std::to_string(kWeightSumTolerance));
    }
    const ParameterSet& base = *models[0];
    for (std::size_t k = 1; k < models.size(); ++k) {
        ParameterSet::require_congruent(base, *models[k], "aggregate");
    }
    if (models.size() == 1) return base.clone(false);
    ParameterSet result;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const Vector& anchor = base.tensor(i).value();
        Vector delta = Vector::Zero(anchor.size());
        for (std::size_t k = 0; k < models.size(); ++k) {
            delta += weights[k] * (models[k]->tensor(i).value() - anchor);
        }
        result.add(base.name(i),
                   Tensor::from_values(base.tensor(i).shape(), anchor + delta, false));
    }
    return result;
}

Scalar divergence(const ParameterSet& a, const ParameterSet& b) {
    ParameterSet::require_congruent(a, b, "divergence");
    Scalar total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += (a.tensor(i).value() - b.tensor(i).value()).squaredNorm();
    }
    return total;
}

PredictorDecision dapu_decide(Scalar div, Scalar mu) {
    return div < mu ? PredictorDecision::UseGlobal : PredictorDecision::KeepLocal;
}

}  // namespace fedu
