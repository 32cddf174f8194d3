#include "egcn/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace egcn {

double decayed_learning_rate(double lr, double decay_rate, std::int64_t decay_every,
                             std::int64_t iteration) {
    if (decay_every < 1) throw parameter_error("decayed_learning_rate: decay_every must be >= 1");
    if (decay_rate <= 0.0 || decay_rate > 1.0) {
        throw parameter_error("decayed_learning_rate: decay_rate must lie in (0, 1]");
    }
    return lr * std::pow(decay_rate, static_cast<double>(iteration / decay_every));
}

void adam_step(param_store& params, adam_state& state, double lr_t,
               const std::vector<std::string>& frozen) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (const std::string& name : params.names()) {
        if (std::find(frozen.begin(), frozen.end(), name) != frozen.end()) continue;
        const tensor& g = params.grad(name);
        if (!g.all_finite()) {
            throw numerical_error("adam_step: non-finite gradient for parameter '" + name + "'");
        }
        tensor& m = params.slot(name, "adam_m");
        tensor& v = params.slot(name, "adam_v");
        tensor& value = params.value(name);
        for (index_t i = 0; i < value.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            value[i] -= lr_t * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

} // namespace egcn
