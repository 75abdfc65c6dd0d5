#pragma once

#include "fedu/parameter_set.hpp"

namespace fedu {

struct SgdConfig {
    Scalar learning_rate = 0.032;
};

// theta -= eta * grad for every entry; every entry must carry a populated
// gradient (ContractError naming the parameter otherwise). Grads are cleared
// afterward. learning_rate must be >= 0.
void sgd_step(ParameterSet& params, const SgdConfig& config);

}  // namespace fedu
