#include "simmc/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace simmc {

namespace {

std::vector<int> identities(std::span<const SkeletonSequence> seqs) {
  std::vector<int> ids;
  ids.reserve(seqs.size());
  for (const auto& s : seqs) {
    const auto id = s.identity();
    if (!id) throw FormatError("sequence '" + s.id() + "' has no identity");
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace

bool RankingResult::has_match(std::size_t probe) const {
  const auto& r = relevant.at(probe);
  return std::find(r.begin(), r.end(), std::uint8_t{1}) != r.end();
}

int RankingResult::excluded_probes() const {
  int n = 0;
  for (std::size_t p = 0; p < probes(); ++p) n += has_match(p) ? 0 : 1;
  return n;
}

RankingResult rank_gallery(const Matrix& probe, const Matrix& gallery,
                           std::span<const int> probe_ids, std::span<const int> gallery_ids) {
  if (gallery.rows() < 1) throw std::invalid_argument("gallery is empty");
  if (probe.cols() != gallery.cols()) {
    throw std::invalid_argument("probe and gallery embeddings differ in width");
  }
  if (static_cast<Index>(probe_ids.size()) != probe.rows() ||
      static_cast<Index>(gallery_ids.size()) != gallery.rows()) {
    throw std::invalid_argument("identity count does not match embeddings");
  }
  if (!probe.allFinite() || !gallery.allFinite()) {
    throw std::invalid_argument("non-finite embedding");
  }

  RankingResult out;
  out.order.resize(static_cast<std::size_t>(probe.rows()));
  out.relevant.resize(out.order.size());
  std::vector<double> dist(static_cast<std::size_t>(gallery.rows()));
  for (Index p = 0; p < probe.rows(); ++p) {
    for (Index g = 0; g < gallery.rows(); ++g) {
      dist[g] = (probe.row(p) - gallery.row(g)).squaredNorm();
    }
    auto& order = out.order[p];
    order.resize(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dist[a] < dist[b]; });
    auto& rel = out.relevant[p];
    rel.resize(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      rel[r] = gallery_ids[order[r]] == probe_ids[p] ? 1 : 0;
    }
  }
  return out;
}

double cmc(const RankingResult& ranking, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > ranking.gallery_size()) {
    throw std::invalid_argument("cmc rank " + std::to_string(k) + " outside [1, " +
                                std::to_string(ranking.gallery_size()) + "]");
  }
  int scored = 0;
  int hits = 0;
  for (std::size_t p = 0; p < ranking.probes(); ++p) {
    if (!ranking.has_match(p)) continue;
    ++scored;
    const auto& rel = ranking.relevant[p];
    if (std::find(rel.begin(), rel.begin() + k, std::uint8_t{1}) != rel.begin() + k) ++hits;
  }
  return scored == 0 ? 0.0 : static_cast<double>(hits) / scored;
}

std::vector<double> cmc_curve(const RankingResult& ranking, int k_max) {
  if (k_max < 1 || static_cast<std::size_t>(k_max) > ranking.gallery_size()) {
    throw std::invalid_argument("cmc curve length outside the gallery size");
  }
  // First-hit rank per probe, then a cumulative histogram.
  std::vector<int> first_hits(static_cast<std::size_t>(k_max), 0);
  int scored = 0;
  for (std::size_t p = 0; p < ranking.probes(); ++p) {
    if (!ranking.has_match(p)) continue;
    ++scored;
    const auto& rel = ranking.relevant[p];
    const auto first = std::find(rel.begin(), rel.end(), std::uint8_t{1}) - rel.begin();
    if (first < k_max) ++first_hits[first];
  }
  std::vector<double> curve(first_hits.size());
  int running = 0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    running += first_hits[k];
    curve[k] = scored == 0 ? 0.0 : static_cast<double>(running) / scored;
  }
  return curve;
}

double mean_average_precision(const RankingResult& ranking) {
  double total = 0.0;
  int scored = 0;
  for (std::size_t p = 0; p < ranking.probes(); ++p) {
    if (!ranking.has_match(p)) continue;
    ++scored;
    const auto& rel = ranking.relevant[p];
    int found = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < rel.size(); ++r) {
      if (!rel[r]) continue;
      ++found;
      ap += static_cast<double>(found) / static_cast<double>(r + 1);
    }
    total += ap / found;
  }
  return scored == 0 ? 0.0 : total / scored;
}

double Metrics::top(int k) const {
  if (cmc.empty()) throw std::logic_error("metrics hold no CMC curve");
  if (k < 1) throw std::invalid_argument("rank must be >= 1");
  return cmc[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(cmc.size())) - 1)];
}

nlohmann::json Metrics::to_json() const {
  return nlohmann::json{
      {"event", "metrics"}, {"top1", top(1)},   {"top5", top(5)},
      {"top10", top(10)},   {"map", map},       {"excluded_probes", excluded_probes},
  };
}

Metrics compute_metrics(const RankingResult& ranking, int k_max) {
  Metrics m;
  const int k = std::min<int>(k_max, static_cast<int>(ranking.gallery_size()));
  m.cmc = cmc_curve(ranking, k);
  m.map = mean_average_precision(ranking);
  m.excluded_probes = ranking.excluded_probes();
  if (m.excluded_probes > 0) {
    spdlog::warn("{} probe(s) have no same-identity gallery entry and were excluded",
                 m.excluded_probes);
  }
  return m;
}

Matrix embed_sequences(const ModelParams& params, std::span<const SkeletonSequence> seqs) {
  Matrix out(static_cast<Index>(seqs.size()), params.hidden());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto mask = MaskVector::all_ones(static_cast<int>(seqs[i].length()));
    out.row(static_cast<Index>(i)) = encode_sequence(params, seqs[i], mask).v.transpose();
  }
  return out;
}

Matrix baseline_embeddings(std::span<const SkeletonSequence> seqs) {
  if (seqs.empty()) return Matrix(0, 0);
  const Index width = seqs.front().frames().size();
  Matrix out(static_cast<Index>(seqs.size()), width);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Vector flat = baseline_representation(seqs[i]);
    if (flat.size() != width) throw std::invalid_argument("sequences differ in size");
    out.row(static_cast<Index>(i)) = flat.transpose();
  }
  return out;
}

Metrics evaluate(const ModelParams* params, const Dataset& dataset, EvalMode mode) {
  if (dataset.probe.empty() || dataset.gallery.empty()) {
    throw std::invalid_argument("evaluation needs non-empty probe and gallery sets");
  }
  Matrix probe;
  Matrix gallery;
  if (mode == EvalMode::encoder) {
    if (!params) throw std::invalid_argument("encoder evaluation needs parameters");
    probe = embed_sequences(*params, dataset.probe);
    gallery = embed_sequences(*params, dataset.gallery);
  } else {
    probe = baseline_embeddings(dataset.probe);
    gallery = baseline_embeddings(dataset.gallery);
  }
  const auto ranking =
      rank_gallery(probe, gallery, identities(dataset.probe), identities(dataset.gallery));
  return compute_metrics(ranking);
}

}  // namespace simmc
