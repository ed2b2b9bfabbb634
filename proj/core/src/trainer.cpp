#include "simmc/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "simmc/objective.hpp"

namespace simmc {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  // lr = 0 is accepted so an epoch can run with a frozen optimizer.
  adam.validate();
  if (seq_len < 1) throw std::invalid_argument("sequence length must be >= 1");
  if (masks < 0 || masks >= seq_len) {
    throw std::invalid_argument("masks (" + std::to_string(masks) +
                                ") must be < sequence length (" + std::to_string(seq_len) + ")");
  }
  if (samplings < 1) throw std::invalid_argument("samplings must be >= 1");
  if (hidden < 1) throw std::invalid_argument("hidden size must be >= 1");
  if (cluster_every < 1) throw std::invalid_argument("cluster_every must be >= 1");
  loss.validate();
  cluster.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"epochs", c.epochs},
      {"batch", c.batch_size},
      {"lr", c.adam.learning_rate},
      {"adam_beta1", c.adam.beta1},
      {"adam_beta2", c.adam.beta2},
      {"adam_eps", c.adam.epsilon},
      {"seq_len", c.seq_len},
      {"masks", c.masks},
      {"samplings", c.samplings},
      {"hidden", c.hidden},
      {"bias", c.bias},
      {"normalize", c.normalize},
      {"cluster_every", c.cluster_every},
      {"temp", c.loss.tau},
      {"alpha", c.loss.alpha},
      {"beta", c.loss.beta},
      {"lambda", c.loss.lambda},
      {"eps", c.cluster.eps ? nlohmann::json(*c.cluster.eps) : nlohmann::json("auto")},
      {"eps_percentile", c.cluster.eps_percentile},
      {"min_pts", c.cluster.min_pts},
      {"seed", c.seed},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("epochs", c.epochs);
  get("batch", c.batch_size);
  get("lr", c.adam.learning_rate);
  get("adam_beta1", c.adam.beta1);
  get("adam_beta2", c.adam.beta2);
  get("adam_eps", c.adam.epsilon);
  get("seq_len", c.seq_len);
  get("masks", c.masks);
  get("samplings", c.samplings);
  get("hidden", c.hidden);
  get("bias", c.bias);
  get("normalize", c.normalize);
  get("cluster_every", c.cluster_every);
  get("temp", c.loss.tau);
  get("alpha", c.loss.alpha);
  get("beta", c.loss.beta);
  get("lambda", c.loss.lambda);
  if (j.contains("eps")) {
    const auto& e = j.at("eps");
    if (e.is_string()) {
      if (e.get<std::string>() != "auto") throw std::invalid_argument("eps must be a number or 'auto'");
      c.cluster.eps.reset();
    } else {
      c.cluster.eps = e.get<double>();
    }
  }
  get("eps_percentile", c.cluster.eps_percentile);
  get("min_pts", c.cluster.min_pts);
  get("seed", c.seed);
}

nlohmann::json EpochStats::to_json() const {
  return nlohmann::json{
      {"event", "epoch"},
      {"epoch", epoch},
      {"mpc", mpc},
      {"mic", mic},
      {"total", total},
      {"clustered", clustered_instances},
      {"clusters", clusters},
      {"noise", noise},
      {"eps", eps},
      {"reclustered", reclustered},
      {"mpc_skipped", mpc_skipped},
      {"steps", steps},
  };
}

Trainer::Trainer(TrainConfig cfg, Index input_dim) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  params_ = ModelParams::initialize(cfg_.hidden, input_dim, cfg_.bias, rng_);
  adam_ = AdamState::for_params(params_);
}

void Trainer::recluster(std::span<const SkeletonSequence> train, EpochStats& stats) {
  const auto n = train.size();
  const auto q = static_cast<std::size_t>(cfg_.samplings);
  masks_.clear();
  masks_.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    masks_.push_back(sample_masks(cfg_.seq_len, cfg_.masks, cfg_.samplings, rng_));
  }

  std::vector<Matrix> sets(q, Matrix(static_cast<Index>(n), params_.hidden()));
  for (std::size_t s = 0; s < n; ++s) {
    const Matrix encoded = encode_frames(params_, train[s].frames());
    for (std::size_t i = 0; i < q; ++i) {
      sets[i].row(static_cast<Index>(s)) = pool_instance(encoded, masks_[s][i]).v.transpose();
    }
  }
  if (cfg_.normalize) {
    for (auto& m : sets) m = l2_normalize_rows(m);
  }
  clusters_ = cluster_all_samplings(sets, cfg_.cluster);

  labels_.assign(n, std::vector<int>(q, kNoise));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < q; ++i) labels_[s][i] = clusters_.assignments[i].labels[s];
  }
  stats.reclustered = true;
}

EpochStats Trainer::train_epoch(std::span<const SkeletonSequence> train) {
  // Nothing below may look at training labels.
  const TrainingGuard guard;
  if (train.empty()) throw std::invalid_argument("training set is empty");
  for (const auto& seq : train) {
    if (seq.length() != cfg_.seq_len || seq.feature_dim() != params_.input_dim()) {
      throw std::invalid_argument("sequence '" + seq.id() + "' does not match f=" +
                                  std::to_string(cfg_.seq_len) + ", K=" +
                                  std::to_string(params_.input_dim()));
    }
  }

  EpochStats stats;
  stats.epoch = epoch_ + 1;
  if (epoch_ % cfg_.cluster_every == 0 || masks_.size() != train.size()) {
    recluster(train, stats);
  }
  for (std::size_t i = 0; i < clusters_.assignments.size(); ++i) {
    stats.clusters.push_back(clusters_.assignments[i].cluster_count);
    stats.noise += clusters_.assignments[i].noise_count();
    stats.eps.push_back(clusters_.eps_used[i]);
  }

  const bool mic_active = cfg_.samplings >= 2 && cfg_.loss.lambda > 0.0;
  if (!clusters_.any_clusters()) {
    if (!mic_active) {
      throw TrainingError("epoch " + std::to_string(stats.epoch) +
                          ": no clusters formed and the intra-sequence loss is disabled");
    }
    spdlog::warn("epoch {}: no clusters formed, training on the intra-sequence loss only",
                 stats.epoch);
    stats.mpc_skipped = true;
  }
  if (cfg_.samplings < 2 && cfg_.loss.lambda > 0.0 && epoch_ == 0) {
    spdlog::warn("intra-sequence loss needs at least two samplings; it contributes 0");
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  const ObjectiveConfig objective{cfg_.loss, cfg_.normalize};
  double mpc_sum = 0.0;
  double mic_sum = 0.0;
  int mpc_count = 0;
  std::vector<BatchItem> batch;
  ModelParams grads;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(cfg_.batch_size)) {
    const std::size_t stop =
        std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
    batch.clear();
    for (std::size_t k = start; k < stop; ++k) {
      const std::size_t s = order[k];
      batch.push_back(BatchItem{&train[s].frames(), masks_[s], labels_[s], {}});
    }
    const BatchResult r = batch_objective(params_, batch, clusters_.prototypes, objective, &grads);
    adam_step(params_, grads, adam_, cfg_.adam);
    ++stats.steps;
    mpc_sum += r.loss.mpc * r.loss.instance_count;
    mpc_count += r.loss.instance_count;
    mic_sum += r.loss.mic * static_cast<double>(batch.size());
  }

  stats.clustered_instances = mpc_count;
  stats.mpc = mpc_count > 0 ? mpc_sum / mpc_count : 0.0;
  stats.mic = mic_sum / static_cast<double>(train.size());
  stats.total = combined_loss(stats.mpc, stats.mic, cfg_.loss.lambda).total;
  ++epoch_;
  return stats;
}

std::vector<EpochStats> Trainer::fit(std::span<const SkeletonSequence> train,
                                     const std::function<void(const EpochStats&)>& on_epoch) {
  std::vector<EpochStats> history;
  for (int e = 0; e < cfg_.epochs; ++e) {
    history.push_back(train_epoch(train));
    if (on_epoch) on_epoch(history.back());
  }
  return history;
}

ModelParams train_model(const Dataset& dataset, const TrainConfig& cfg,
                        const std::function<void(const EpochStats&)>& on_epoch) {
  if (dataset.train.empty()) throw std::invalid_argument("dataset has no training sequences");
  if (dataset.seq_len != cfg.seq_len) {
    throw std::invalid_argument("dataset windows have f=" + std::to_string(dataset.seq_len) +
                                " but the config asks for f=" + std::to_string(cfg.seq_len));
  }
  Trainer trainer(cfg, dataset.feature_dim);
  trainer.fit(dataset.train, on_epoch);
  return trainer.params();
}

ModelParams finetune(const Dataset& features, const TrainConfig& cfg,
                     const std::function<void(const EpochStats&)>& on_epoch) {
  if (features.feature_dim < 1) throw FormatError("feature dataset has no feature dimension");
  return train_model(features, cfg, on_epoch);
}

}  // namespace simmc
