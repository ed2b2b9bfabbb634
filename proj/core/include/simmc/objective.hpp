#pragma once

#include <span>
#include <vector>

#include "simmc/clustering.hpp"
#include "simmc/encoder.hpp"
#include "simmc/losses.hpp"
#include "simmc/masking.hpp"

namespace simmc {

// One training sequence inside a minibatch: its frames, the epoch's masks
// (one per sampling) and its cluster label in each sampling.
struct BatchItem {
  const Matrix* frames = nullptr;
  std::span<const MaskVector> masks;
  std::span<const int> labels;
  // Optional values for the stop-gradient operands of the intra-sequence
  // term, one per sampling; empty means the live instances are used.
  // Finite-difference checks pin these so that the stopped branch stays put.
  std::span<const Vector> mic_targets;
};

struct ObjectiveConfig {
  LossConfig loss;
  bool normalize = true;  // compare unit-length instances against prototypes
};

struct BatchResult {
  LossValue loss;
  bool mpc_skipped = false;   // no clustered instance in the batch
  bool mic_disabled = false;  // fewer than two samplings
  int mic_degenerate_terms = 0;
};

// Evaluates lambda * MIC + (1 - lambda) * MPC on a batch with fixed
// prototypes. When grads is non-null it receives the exact parameter
// gradient of the returned total.
BatchResult batch_objective(const ModelParams& params, std::span<const BatchItem> batch,
                            std::span<const PrototypeSet> prototypes, const ObjectiveConfig& cfg,
                            ModelParams* grads);

}  // namespace simmc
