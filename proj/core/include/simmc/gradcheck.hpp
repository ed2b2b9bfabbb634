#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simmc/losses.hpp"

namespace simmc {

struct GradCheckConfig {
  int input_dim = 6;   // K
  int hidden = 5;      // H
  int seq_len = 4;     // f
  int masks = 1;       // x
  int samplings = 2;   // q
  int batch = 8;
  int prototypes = 3;  // per sampling
  LossConfig loss{0.5, 0.5, 0.5, 0.5};
  bool normalize = true;
  bool bias = false;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  // Test hook: perturbs the analytic W1 gradient so the check must fail.
  bool corrupt_gradient = false;

  void validate() const;
};

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double loss = 0.0;
  bool passed = true;

  nlohmann::json to_json() const;
};

// Central-difference check of the combined batch objective on a random
// small problem. Error per element is |analytic - numeric| / (|numeric| + 1e-8).
GradCheckReport run_gradcheck(const GradCheckConfig& cfg);

}  // namespace simmc
