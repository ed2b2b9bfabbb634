#pragma once

#include <span>
#include <vector>

#include "simmc/clustering.hpp"
#include "simmc/types.hpp"

namespace simmc {

struct LossConfig {
  double tau = 0.08;    // prototype softmax temperature
  double alpha = 0.5;   // weight of cos(z_i, sg(v_j))
  double beta = 0.5;    // weight of cos(z_j, sg(v_i))
  double lambda = 0.5;  // total = lambda * mic + (1 - lambda) * mpc

  void validate() const;
};

struct LossValue {
  double total = 0.0;
  double mpc = 0.0;
  double mic = 0.0;
  int instance_count = 0;  // clustered instances behind the mpc term
};

// One instance entering the prototype loss: its vector, the sampling it was
// drawn in, and its cluster label there (kNoise excludes it).
struct MpcSample {
  const Vector* v = nullptr;
  int sampling = 0;
  int label = kNoise;
};

struct MpcResult {
  double loss = 0.0;
  int count = 0;
  bool skipped = false;       // no clustered instance: loss is 0, no gradient
  std::vector<Vector> grads;  // dL/dv per sample; empty vectors for noise
};

// Mean over clustered samples of -log softmax_c(v . p / tau) against the
// prototypes of the sample's own sampling. Prototypes are constants.
MpcResult mpc_loss(std::span<const MpcSample> samples, std::span<const PrototypeSet> prototypes,
                   double tau);

// Per-instance term and its gradient; exposed for the loss tests.
double mpc_instance_loss(const Vector& v, const Matrix& prototypes, int target, double tau,
                         Vector* grad);

struct MicResult {
  double loss = 0.0;
  Vector grad_zi;  // gradients exist only for the projections;
  Vector grad_zj;  // v_i and v_j sit behind stop-gradient
  int degenerate_terms = 0;  // cosine terms dropped for a zero-norm operand
};

// -alpha cos(z_i, sg(v_j)) - beta cos(z_j, sg(v_i))
MicResult mic_loss(const Vector& v_i, const Vector& v_j, const Vector& z_i, const Vector& z_j,
                   double alpha, double beta);

struct MicMultiResult {
  double loss = 0.0;
  std::vector<Vector> grad_z;  // one per sampling
  bool disabled = false;       // fewer than two samplings
  int degenerate_terms = 0;
};

// Mean of mic_loss over all unordered sampling pairs of one sequence.
MicMultiResult mic_loss_multi(std::span<const Vector> v, std::span<const Vector> z, double alpha,
                              double beta);

LossValue combined_loss(double mpc, double mic, double lambda);

double cosine(const Vector& a, const Vector& b);

// d(cos(a, b))/da, zero when either vector is zero.
Vector cosine_grad(const Vector& a, const Vector& b);

Vector l2_normalize(const Vector& v);

// Chain rule through u = v / |v|: maps dL/du to dL/dv.
Vector l2_normalize_backward(const Vector& v, const Vector& grad_unit);

}  // namespace simmc
