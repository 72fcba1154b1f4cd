#include "fontmanifold/adam.hpp"

#include <cmath>

#include "fontmanifold/error.hpp"

namespace fm::ad {

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state,
               const AdamConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (auto& [name, param] : params) {
    auto [m_it, m_new] = state.first_moment.try_emplace(name, param.shape(), 0.0);
    auto [v_it, v_new] = state.second_moment.try_emplace(name, param.shape(), 0.0);
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    const auto g_it = grads.find(name);
    const Tensor* g = g_it == grads.end() ? nullptr : &g_it->second;
    if (g && g->shape() != param.shape()) {
      throw Error(Errc::Shape, "adam_step: gradient shape mismatch for " + name);
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace fm::ad
