#include "fedu/sgd.hpp"

#include "fedu/errors.hpp"

namespace fedu {

void sgd_step(ParameterSet& params, const SgdConfig& config) {
    if (config.learning_rate < 0) {
        throw ContractError("sgd_step: negative learning rate");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params.tensor(i).has_grad()) {
            throw ContractError("sgd_step: parameter '" + params.name(i) + "' has no gradient");
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params.tensor(i);
        t.value() -= config.learning_rate * t.grad();
        t.clear_grad();
    }
}

}  // namespace fedu
