#pragma once

#include <string>
#include <vector>

#include "fedu/parameter_set.hpp"

namespace fedu {

// Which client branch is uploaded for averaging.
enum class AggregateSource { Online, Target };
// Which client branch the distributed global encoder overwrites.
enum class UpdateTarget { Online, Target, Both };
// How the client predictor is refreshed at the start of a round.
enum class PredictorPolicy { AlwaysLocal, AlwaysGlobal, Dapu };

enum class PredictorDecision { KeepLocal, UseGlobal };

std::string to_string(AggregateSource);
std::string to_string(UpdateTarget);
std::string to_string(PredictorPolicy);
std::string to_string(PredictorDecision);

struct ProtocolConfig {
    AggregateSource aggregate_source = AggregateSource::Online;
    UpdateTarget update_target = UpdateTarget::Online;
    PredictorPolicy predictor_policy = PredictorPolicy::Dapu;
    // Divergence threshold; only meaningful for the Dapu policy.
    Scalar mu = 0.2;

    void validate() const;
};

inline constexpr Scalar kWeightSumTolerance = 1e-12;

// Weighted mean of congruent parameter sets, iterated in the order given.
// Weights must be non-negative and sum to 1 within kWeightSumTolerance.
// Computed in anchored form (first model plus weighted deltas) so averaging
// identical models returns them bitwise.
ParameterSet aggregate(const std::vector<const ParameterSet*>& models,
                       const std::vector<Scalar>& weights);

// Sum of squared elementwise differences over congruent sets.
Scalar divergence(const ParameterSet& a, const ParameterSet& b);

// Adopt the global predictor iff div < mu (strict).
PredictorDecision dapu_decide(Scalar div, Scalar mu);

}  // namespace fedu
