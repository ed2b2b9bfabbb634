#include "simmc/objective.hpp"

#include <stdexcept>

namespace simmc {

BatchResult batch_objective(const ModelParams& params, std::span<const BatchItem> batch,
                            std::span<const PrototypeSet> prototypes, const ObjectiveConfig& cfg,
                            ModelParams* grads) {
  cfg.loss.validate();
  if (batch.empty()) throw std::invalid_argument("empty batch");

  GradientTape tape(params);
  const std::size_t q = batch.front().masks.size();
  for (const auto& item : batch) {
    if (item.masks.size() != q || item.labels.size() != q) {
      throw std::invalid_argument("batch items disagree on the number of samplings");
    }
    tape.record(*item.frames, item.masks);
  }

  BatchResult out;
  const double lambda = cfg.loss.lambda;

  // Prototype term over every clustered (sequence, sampling) instance.
  std::vector<Vector> compared;
  compared.reserve(batch.size() * q);
  std::vector<MpcSample> samples;
  samples.reserve(batch.size() * q);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t i = 0; i < q; ++i) {
      const Vector& v = tape.instance(b, i);
      compared.push_back(cfg.normalize ? l2_normalize(v) : v);
    }
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t i = 0; i < q; ++i) {
      samples.push_back(MpcSample{&compared[b * q + i], static_cast<int>(i), batch[b].labels[i]});
    }
  }
  const MpcResult mpc = mpc_loss(samples, prototypes, cfg.loss.tau);
  out.mpc_skipped = mpc.skipped;

  // Intra-sequence term, averaged over sequences.
  double mic_sum = 0.0;
  std::vector<std::vector<Vector>> mic_grads(batch.size());
  std::vector<Vector> v(q);
  std::vector<Vector> z(q);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& targets = batch[b].mic_targets;
    if (!targets.empty() && targets.size() != q) {
      throw std::invalid_argument("mic_targets must hold one vector per sampling");
    }
    for (std::size_t i = 0; i < q; ++i) {
      v[i] = targets.empty() ? tape.instance(b, i) : targets[i];
      z[i] = tape.projection(b, i);
    }
    MicMultiResult r = mic_loss_multi(v, z, cfg.loss.alpha, cfg.loss.beta);
    out.mic_disabled = r.disabled;
    out.mic_degenerate_terms += r.degenerate_terms;
    mic_sum += r.loss;
    mic_grads[b] = std::move(r.grad_z);
  }
  const double mic = out.mic_disabled ? 0.0 : mic_sum / static_cast<double>(batch.size());

  out.loss = combined_loss(mpc.loss, mic, lambda);
  out.loss.instance_count = mpc.count;

  if (grads) {
    const double mpc_weight = 1.0 - lambda;
    const double mic_weight = lambda / static_cast<double>(batch.size());
    const bool use_mpc = !mpc.skipped && mpc_weight != 0.0;
    const bool use_mic = !out.mic_disabled && mic_weight != 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t i = 0; i < q; ++i) {
        Vector dv;
        Vector dz;
        const std::size_t k = b * q + i;
        if (use_mpc && mpc.grads[k].size() > 0) {
          const Vector g = mpc_weight * mpc.grads[k];
          dv = cfg.normalize ? l2_normalize_backward(tape.instance(b, i), g) : g;
        }
        if (use_mic) dz = mic_weight * mic_grads[b][i];
        tape.add_upstream(b, i, dv, dz);
      }
    }
    *grads = tape.backward();
  }
  return out;
}

}  // namespace simmc
