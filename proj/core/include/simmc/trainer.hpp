#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "simmc/clustering.hpp"
#include "simmc/data.hpp"
#include "simmc/encoder.hpp"
#include "simmc/losses.hpp"
#include "simmc/masking.hpp"
#include "simmc/optimizer.hpp"

namespace simmc {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 256;
  AdamConfig adam;
  int seq_len = 6;    // f
  int masks = 2;      // x, frames zeroed per sampling
  int samplings = 2;  // q
  int hidden = 256;   // H
  bool bias = false;
  bool normalize = true;
  int cluster_every = 1;
  LossConfig loss;
  ClusterSettings cluster;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double mpc = 0.0;
  double mic = 0.0;
  double total = 0.0;
  int clustered_instances = 0;
  std::vector<int> clusters;  // C_i per sampling
  std::vector<double> eps;    // DBSCAN radius per sampling
  int noise = 0;              // noise instances summed over samplings
  bool reclustered = false;
  bool mpc_skipped = false;   // no clusters anywhere: MIC-only epoch
  int steps = 0;

  nlohmann::json to_json() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Alternates per-epoch clustering of masked instances with minibatch Adam
// steps on the combined prototype / intra-sequence objective.
class Trainer {
 public:
  // Parameters are initialized from cfg.seed.
  Trainer(TrainConfig cfg, Index input_dim);

  EpochStats train_epoch(std::span<const SkeletonSequence> train);

  std::vector<EpochStats> fit(std::span<const SkeletonSequence> train,
                              const std::function<void(const EpochStats&)>& on_epoch = {});

  const ModelParams& params() const { return params_; }
  const AdamState& optimizer_state() const { return adam_; }
  const TrainConfig& config() const { return cfg_; }
  int epochs_done() const { return epoch_; }

 private:
  void recluster(std::span<const SkeletonSequence> train, EpochStats& stats);

  TrainConfig cfg_;
  Rng rng_;
  ModelParams params_;
  AdamState adam_;
  int epoch_ = 0;
  std::vector<std::vector<MaskVector>> masks_;  // [sequence][sampling]
  std::vector<std::vector<int>> labels_;        // [sequence][sampling]
  ClusteringResult clusters_;
};

// Trains a fresh model on dataset.train.
ModelParams train_model(const Dataset& dataset, const TrainConfig& cfg,
                        const std::function<void(const EpochStats&)>& on_epoch = {});

// Same pipeline on pre-extracted per-frame features; K is taken from the data.
ModelParams finetune(const Dataset& features, const TrainConfig& cfg,
                     const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace simmc
