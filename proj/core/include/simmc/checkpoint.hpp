#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>

#include "simmc/encoder.hpp"
#include "simmc/trainer.hpp"

namespace simmc {

// Layout: "SIMMC1", u32 H, u32 K, u32 bias flag (little endian), then W1,
// W2, Wc (and b1, b2, bc when the flag is set) as little-endian float32 in
// row-major order, then a one-line JSON trailer with the hyperparameters.
// Weights are stored in single precision; values already representable as
// float32 round-trip bit-exactly.

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const TrainConfig& config);

// expected_hidden, when set, must match the stored H.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Index> expected_hidden = std::nullopt);

}  // namespace simmc
