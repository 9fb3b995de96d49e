#include <cmath>

#include "pacmetric/paclearn.hpp"

namespace pacmetric::paclearn {

void adamw_step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads, AdamState& state, double lr) {
    if (params.size() != grads.size()) throw ShapeError("adamw_step: params/grads count mismatch");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].size() != grads[p].size())
            throw ShapeError("adamw_step: parameter " + std::to_string(p) + " shape mismatch");
        for (double g : grads[p])
            if (!std::isfinite(g))
                throw DegenerateInputError("adamw_step: non-finite gradient in parameter " + std::to_string(p));
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    } else if (state.m.size() != params.size()) {
        throw ShapeError("adamw_step: state was created for a different parameter set");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto theta = params[p];
        auto g = grads[p];
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + state.eps) + state.weight_decay * theta[i]);
        }
    }
}

}  // namespace pacmetric::paclearn
