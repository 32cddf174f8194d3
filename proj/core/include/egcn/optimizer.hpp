#ifndef EGCN_OPTIMIZER_HPP
#define EGCN_OPTIMIZER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "egcn/param_store.hpp"

namespace egcn {

/// Adam with the standard published moment constants.
struct adam_state {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
};

/// lr * decay_rate^floor(iteration / decay_every).
double decayed_learning_rate(double lr, double decay_rate, std::int64_t decay_every,
                             std::int64_t iteration);

/// One bias-corrected Adam update over every parameter (sorted name order).
/// Parameters listed in `frozen` are skipped entirely.
void adam_step(param_store& params, adam_state& state, double lr_t,
               const std::vector<std::string>& frozen = {});

} // namespace egcn

#endif // EGCN_OPTIMIZER_HPP
