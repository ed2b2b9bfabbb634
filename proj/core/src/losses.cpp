#include "simmc/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace simmc {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (!(alpha + beta > 0.0)) throw std::invalid_argument("alpha + beta must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
}

double mpc_instance_loss(const Vector& v, const Matrix& prototypes, int target, double tau,
                         Vector* grad) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (target < 0 || target >= prototypes.rows()) {
    throw std::invalid_argument("target prototype out of range");
  }
  const Vector logits = prototypes * v / tau;
  const double top = logits.maxCoeff();
  const Vector e = (logits.array() - top).exp().matrix();
  const double z = e.sum();
  const double loss = std::log(z) + top - logits(target);
  if (grad) {
    const Vector prob = e / z;
    // d/dv [logsumexp(Pv/tau) - p_c.v/tau] = (P^T softmax - p_c) / tau
    *grad = (prototypes.transpose() * prob - prototypes.row(target).transpose()) / tau;
  }
  return loss;
}

MpcResult mpc_loss(std::span<const MpcSample> samples, std::span<const PrototypeSet> prototypes,
                   double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  MpcResult out;
  out.grads.resize(samples.size());
  for (const auto& s : samples) {
    if (s.label == kNoise) continue;
    if (s.sampling < 0 || s.sampling >= static_cast<int>(prototypes.size()) ||
        s.label >= prototypes[s.sampling].size()) {
      throw std::invalid_argument("clustered instance has no prototype in its sampling");
    }
    ++out.count;
  }
  if (out.count == 0) {
    out.skipped = true;
    return out;
  }
  const double inv_n = 1.0 / static_cast<double>(out.count);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (s.label == kNoise) continue;
    Vector g;
    out.loss += mpc_instance_loss(*s.v, prototypes[s.sampling].prototypes, s.label, tau, &g);
    out.grads[k] = g * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Vector cosine_grad(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return Vector::Zero(a.size());
  const double c = a.dot(b) / (na * nb);
  return (b / nb - c * a / na) / na;
}

MicResult mic_loss(const Vector& v_i, const Vector& v_j, const Vector& z_i, const Vector& z_j,
                   double alpha, double beta) {
  MicResult out;
  const auto term = [&](const Vector& z, const Vector& target, double weight, Vector& grad) {
    if (z.norm() == 0.0 || target.norm() == 0.0) {
      ++out.degenerate_terms;
      grad = Vector::Zero(z.size());
      return;
    }
    out.loss -= weight * cosine(z, target);
    grad = -weight * cosine_grad(z, target);
  };
  term(z_i, v_j, alpha, out.grad_zi);
  term(z_j, v_i, beta, out.grad_zj);
  if (out.degenerate_terms > 0) {
    spdlog::debug("mic: {} cosine term(s) dropped for a zero-norm vector", out.degenerate_terms);
  }
  return out;
}

MicMultiResult mic_loss_multi(std::span<const Vector> v, std::span<const Vector> z, double alpha,
                              double beta) {
  if (v.size() != z.size()) throw std::invalid_argument("mic: instance/projection count differ");
  MicMultiResult out;
  const std::size_t q = v.size();
  if (q < 2) {
    out.disabled = true;
    return out;
  }
  out.grad_z.assign(q, Vector::Zero(z.front().size()));
  const double pairs = static_cast<double>(q * (q - 1) / 2);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) {
      const MicResult r = mic_loss(v[i], v[j], z[i], z[j], alpha, beta);
      out.loss += r.loss;
      out.grad_z[i] += r.grad_zi;
      out.grad_z[j] += r.grad_zj;
      out.degenerate_terms += r.degenerate_terms;
    }
  }
  if (q > 2) {
    out.loss /= pairs;
    for (auto& g : out.grad_z) g /= pairs;
  }
  return out;
}

LossValue combined_loss(double mpc, double mic, double lambda) {
  LossValue out;
  out.mpc = mpc;
  out.mic = mic;
  out.total = lambda * mic + (1.0 - lambda) * mpc;
  return out;
}

Vector l2_normalize(const Vector& v) {
  const double n = v.norm();
  return n > 0.0 ? Vector(v / n) : v;
}

Vector l2_normalize_backward(const Vector& v, const Vector& grad_unit) {
  const double n = v.norm();
  if (n == 0.0) return Vector::Zero(v.size());
  const Vector u = v / n;
  return (grad_unit - u.dot(grad_unit) * u) / n;
}

}  // namespace simmc
