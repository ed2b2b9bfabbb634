#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "simmc/data.hpp"
#include "simmc/encoder.hpp"

namespace simmc {

struct RankingResult {
  // order[p] lists gallery indices by ascending distance, ties by index.
  std::vector<std::vector<int>> order;
  // relevant[p][r] is 1 when order[p][r] shares the probe's identity.
  std::vector<std::vector<std::uint8_t>> relevant;

  std::size_t probes() const { return order.size(); }
  std::size_t gallery_size() const { return order.empty() ? 0 : order.front().size(); }
  bool has_match(std::size_t probe) const;
  // Probes with no same-identity gallery entry; metrics skip them.
  int excluded_probes() const;
};

// Euclidean matching of each probe row against every gallery row.
RankingResult rank_gallery(const Matrix& probe, const Matrix& gallery,
                           std::span<const int> probe_ids, std::span<const int> gallery_ids);

// Fraction of scored probes with a relevant entry in their top k.
double cmc(const RankingResult& ranking, int k);

// cmc(k) for k = 1..k_max.
std::vector<double> cmc_curve(const RankingResult& ranking, int k_max);

double mean_average_precision(const RankingResult& ranking);

struct Metrics {
  std::vector<double> cmc;  // cmc[k-1] = top-k accuracy
  double map = 0.0;
  int excluded_probes = 0;

  // Top-k accuracy; k past the gallery size reads the last curve point.
  double top(int k) const;
  nlohmann::json to_json() const;
};

Metrics compute_metrics(const RankingResult& ranking, int k_max = 100);

enum class EvalMode { encoder, baseline };

// Unmasked pooled encoder output per sequence, one row each.
Matrix embed_sequences(const ModelParams& params, std::span<const SkeletonSequence> seqs);
Matrix baseline_embeddings(std::span<const SkeletonSequence> seqs);

// params may be null for EvalMode::baseline.
Metrics evaluate(const ModelParams* params, const Dataset& dataset, EvalMode mode);

}  // namespace simmc
