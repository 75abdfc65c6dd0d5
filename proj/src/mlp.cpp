#include "fedu/mlp.hpp"

#include <cmath>

#include "fedu/errors.hpp"

namespace fedu {

void MlpSpec::validate() const {
    if (widths.size() < 2) {
        throw ConfigError("mlp: need at least input and output widths, got " +
                          std::to_string(widths.size()));
    }
    for (Index w : widths) {
        if (w <= 0) throw ConfigError("mlp: widths must be positive");
    }
}

ParameterSet init_mlp(const MlpSpec& spec, Rng& rng, bool requires_grad) {
    spec.validate();
    ParameterSet params;
    for (std::size_t layer = 0; layer < spec.layer_count(); ++layer) {
        const Index fan_in = spec.widths[layer];
        const Index fan_out = spec.widths[layer + 1];
        const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(fan_in));
        std::string prefix = "layer" + std::to_string(layer);
        params.add(prefix + ".weight",
                   Tensor::uniform({fan_in, fan_out}, -bound, bound, rng, requires_grad));
        params.add(prefix + ".bias",
                   Tensor::uniform({fan_out}, -bound, bound, rng, requires_grad));
    }
    return params;
}

void require_mlp_params(const MlpSpec& spec, const ParameterSet& params,
                        const std::string& context) {
    spec.validate();
    Rng throwaway(0);
    ParameterSet expected = init_mlp(spec, throwaway, false);
    ParameterSet::require_congruent(expected, params, context);
}

Tensor mlp_forward(const MlpSpec& spec, const ParameterSet& params, const Tensor& x) {
    if (x.rank() != 2 || x.shape()[1] != spec.input_dim()) {
        throw DimensionError("mlp_forward: input shape " + shape_str(x.shape()) +
                             " does not match input dim " + std::to_string(spec.input_dim()));
    }
    Tensor h = x;
    for (std::size_t layer = 0; layer < spec.layer_count(); ++layer) {
        std::string prefix = "layer" + std::to_string(layer);
        h = add_rowvec(matmul(h, params.at(prefix + ".weight")), params.at(prefix + ".bias"));
        if (layer + 1 < spec.layer_count()) h = relu(h);
    }
    return h;
}

Matrix mlp_forward_values(const MlpSpec& spec, const ParameterSet& params, const Matrix& x) {
    if (x.cols() != spec.input_dim()) {
        throw DimensionError("mlp_forward_values: input has " + std::to_string(x.cols()) +
                             " columns, expected " + std::to_string(spec.input_dim()));
    }
    Matrix h = x;
    for (std::size_t layer = 0; layer < spec.layer_count(); ++layer) {
        std::string prefix = "layer" + std::to_string(layer);
        const Tensor& w = params.at(prefix + ".weight");
        const Tensor& b = params.at(prefix + ".bias");
        h = (h * w.matrix()).rowwise() + b.value().transpose();
        if (layer + 1 < spec.layer_count()) h = h.cwiseMax(Scalar(0));
    }
    return h;
}

}  // namespace fedu
