#include "simmc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "simmc/clustering.hpp"
#include "simmc/encoder.hpp"
#include "simmc/masking.hpp"
#include "simmc/objective.hpp"

namespace simmc {

void GradCheckConfig::validate() const {
  if (input_dim < 1 || hidden < 1 || seq_len < 1 || batch < 1 || prototypes < 1) {
    throw std::invalid_argument("gradcheck dimensions must be >= 1");
  }
  if (masks < 0 || masks >= seq_len) throw std::invalid_argument("masks must be < seq_len");
  if (samplings < 1) throw std::invalid_argument("samplings must be >= 1");
  if (!(step > 0.0) || !(tolerance > 0.0)) {
    throw std::invalid_argument("step and tolerance must be > 0");
  }
  loss.validate();
}

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) {
    blocks_json.push_back({{"block", b.name},
                           {"max_rel_error", b.max_rel_error},
                           {"max_abs_grad", b.max_abs_analytic},
                           {"passed", b.passed}});
  }
  return {{"event", "gradcheck"}, {"loss", loss}, {"passed", passed}, {"blocks", blocks_json}};
}

GradCheckReport run_gradcheck(const GradCheckConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ModelParams params = ModelParams::initialize(cfg.hidden, cfg.input_dim, cfg.bias, rng);
  if (cfg.bias) {
    for_each_block(params, [&](std::string_view name, std::span<double> values) {
      if (name.front() == 'b') {
        for (double& x : values) x = 0.1 * gauss(rng);
      }
    });
  }

  std::vector<Matrix> frames(static_cast<std::size_t>(cfg.batch));
  std::vector<std::vector<MaskVector>> masks;
  std::vector<std::vector<int>> labels;
  std::uniform_int_distribution<int> pick_label(-1, cfg.prototypes - 1);
  for (int b = 0; b < cfg.batch; ++b) {
    frames[b] = Matrix(cfg.seq_len, cfg.input_dim);
    for (Index k = 0; k < frames[b].size(); ++k) frames[b].data()[k] = gauss(rng);
    masks.push_back(sample_masks(cfg.seq_len, cfg.masks, cfg.samplings, rng));
    std::vector<int> l(static_cast<std::size_t>(cfg.samplings));
    for (auto& x : l) x = std::max(pick_label(rng), b == 0 ? 0 : -1);
    labels.push_back(std::move(l));
  }
  std::vector<PrototypeSet> prototypes(static_cast<std::size_t>(cfg.samplings));
  for (int i = 0; i < cfg.samplings; ++i) {
    prototypes[i].sampling_index = i;
    prototypes[i].prototypes = Matrix(cfg.prototypes, cfg.hidden);
    for (Index k = 0; k < prototypes[i].prototypes.size(); ++k) {
      prototypes[i].prototypes.data()[k] = gauss(rng);
    }
    prototypes[i].prototypes = 0.8 * l2_normalize_rows(prototypes[i].prototypes);
    prototypes[i].member_counts.assign(static_cast<std::size_t>(cfg.prototypes), 1);
  }

  // The stopped operands are constants: evaluate them once at the base point.
  std::vector<std::vector<Vector>> targets(static_cast<std::size_t>(cfg.batch));
  for (int b = 0; b < cfg.batch; ++b) {
    for (const auto& m : masks[b]) targets[b].push_back(pool_instance(encode_frames(params, frames[b]), m).v);
  }
  std::vector<BatchItem> batch;
  for (int b = 0; b < cfg.batch; ++b) {
    batch.push_back(BatchItem{&frames[b], masks[b], labels[b], targets[b]});
  }
  const ObjectiveConfig objective{cfg.loss, cfg.normalize};
  const auto loss_at = [&](const ModelParams& p) {
    return batch_objective(p, batch, prototypes, objective, nullptr).loss.total;
  };

  GradCheckReport report;
  ModelParams analytic;
  report.loss = batch_objective(params, batch, prototypes, objective, &analytic).loss.total;
  if (cfg.corrupt_gradient) analytic.w1 *= 1.01;

  std::vector<std::span<const double>> analytic_blocks;
  for_each_block(analytic, [&](std::string_view, std::span<const double> b) {
    analytic_blocks.push_back(b);
  });

  ModelParams probe = params;
  std::size_t block = 0;
  for_each_block(probe, [&](std::string_view name, std::span<double> values) {
    BlockCheck check{std::string(name)};
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + cfg.step;
      const double up = loss_at(probe);
      values[k] = saved - cfg.step;
      const double down = loss_at(probe);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * cfg.step);
      const double a = analytic_blocks[block][k];
      const double rel = std::abs(a - numeric) / (std::abs(numeric) + 1e-8);
      check.max_rel_error = std::max(check.max_rel_error, rel);
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(a));
    }
    check.passed = check.max_rel_error < cfg.tolerance;
    report.passed = report.passed && check.passed;
    report.blocks.push_back(std::move(check));
    ++block;
  });
  return report;
}

}  // namespace simmc
