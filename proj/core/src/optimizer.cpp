#include "simmc/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace simmc {

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
}

AdamState AdamState::for_params(const ModelParams& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const AdamConfig& cfg) {
  cfg.validate();
  if (grads.hidden() != params.hidden() || grads.input_dim() != params.input_dim() ||
      grads.has_bias() != params.has_bias() || state.m.hidden() != params.hidden() ||
      state.m.input_dim() != params.input_dim() || state.m.has_bias() != params.has_bias()) {
    throw std::invalid_argument("adam: gradient/state shapes do not match parameters");
  }
  if (state.step < 0) throw std::invalid_argument("adam: negative step counter");
  if (!grads.all_finite()) throw std::domain_error("adam: non-finite gradient, step aborted");

  std::vector<std::span<const double>> g;
  for_each_block(grads, [&](std::string_view, std::span<const double> b) { g.push_back(b); });
  std::vector<std::span<double>> m;
  std::vector<std::span<double>> v;
  for_each_block(state.m, [&](std::string_view, std::span<double> b) { m.push_back(b); });
  for_each_block(state.v, [&](std::string_view, std::span<double> b) { v.push_back(b); });

  const std::int64_t t = state.step + 1;
  const double correct1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double correct2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  std::size_t block = 0;
  for_each_block(params, [&](std::string_view, std::span<double> theta) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[block][k];
      m[block][k] = cfg.beta1 * m[block][k] + (1.0 - cfg.beta1) * gk;
      v[block][k] = cfg.beta2 * v[block][k] + (1.0 - cfg.beta2) * gk * gk;
      const double m_hat = m[block][k] / correct1;
      const double v_hat = v[block][k] / correct2;
      theta[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    ++block;
  });
  state.step = t;
}

}  // namespace simmc
