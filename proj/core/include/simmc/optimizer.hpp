#pragma once

#include <cstdint>

#include "simmc/encoder.hpp"

namespace simmc {

struct AdamConfig {
  double learning_rate = 0.00035;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  ModelParams m;  // first moments
  ModelParams v;  // second moments
  std::int64_t step = 0;

  static AdamState for_params(const ModelParams& params);
};

// One bias-corrected Adam update. A non-finite gradient throws
// std::domain_error before anything is modified.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace simmc
