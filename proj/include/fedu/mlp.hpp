#pragma once

#include <vector>

#include "fedu/parameter_set.hpp"
#include "fedu/rng.hpp"

namespace fedu {

// Fully connected ReLU network. widths = [input, hidden..., output]; ReLU
// between layers, none after the last.
struct MlpSpec {
    std::vector<Index> widths;

    Index input_dim() const { return widths.front(); }
    Index output_dim() const { return widths.back(); }
    std::size_t layer_count() const { return widths.size() - 1; }

    void validate() const;
    bool operator==(const MlpSpec&) const = default;
};

// Parameters named layer<i>.weight ([in,out]) and layer<i>.bias ([out]).
// Entries drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), weights before
// biases, layers in order, from the given stream.
ParameterSet init_mlp(const MlpSpec& spec, Rng& rng, bool requires_grad);

// Shapes of `params` must match `spec` (ContractError naming the parameter).
void require_mlp_params(const MlpSpec& spec, const ParameterSet& params, const std::string& context);

// Autodiff forward pass; x is [B, input_dim].
Tensor mlp_forward(const MlpSpec& spec, const ParameterSet& params, const Tensor& x);

// Plain forward pass with no graph; used for frozen-encoder embedding.
Matrix mlp_forward_values(const MlpSpec& spec, const ParameterSet& params, const Matrix& x);

}  // namespace fedu
