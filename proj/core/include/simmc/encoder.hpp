#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "simmc/masking.hpp"
#include "simmc/types.hpp"

namespace simmc {

class SkeletonSequence;

// Frame encoder h = W2 relu(W1 s) and linear projection z = Wc v. Bias
// vectors are empty unless the model was built with biases enabled.
// The same layout doubles as the container for gradients and Adam moments.
struct ModelParams {
  Matrix w1;  // H x K
  Matrix w2;  // H x H
  Matrix wc;  // H x H
  Vector b1;
  Vector b2;
  Vector bc;

  static ModelParams zeros(Index hidden, Index input_dim, bool with_bias = false);
  // Glorot-uniform weights, zero biases.
  static ModelParams initialize(Index hidden, Index input_dim, bool with_bias, Rng& rng);

  Index hidden() const { return w1.rows(); }
  Index input_dim() const { return w1.cols(); }
  bool has_bias() const { return b1.size() > 0; }
  std::size_t parameter_count() const;

  // Throws std::invalid_argument on inconsistent shapes or non-finite values.
  void validate() const;

  ModelParams zeros_like() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

// Visits each parameter block as a flat row-major span, in checkpoint order:
// w1, w2, wc, then b1, b2, bc when present.
void for_each_block(ModelParams& p, const std::function<void(std::string_view, std::span<double>)>& fn);
void for_each_block(const ModelParams& p,
                    const std::function<void(std::string_view, std::span<const double>)>& fn);

struct SkeletonInstance {
  Vector v;
  int seq_index = 0;
  int sampling_index = 0;
};

Vector encode_frame(const ModelParams& params, const Eigen::Ref<const Vector>& s);

// Row j of the result is encode_frame of row j of frames.
Matrix encode_frames(const ModelParams& params, const Matrix& frames);

// Masked mean of the surviving rows.
SkeletonInstance pool_instance(const Matrix& encoded, const MaskVector& mask);

SkeletonInstance encode_sequence(const ModelParams& params, const SkeletonSequence& seq,
                                 const MaskVector& mask);

Vector project(const ModelParams& params, const Eigen::Ref<const Vector>& v);

// Records forward activations for a batch of sequences and back-propagates
// upstream gradients on their pooled instances (v) and projections (z)
// into parameter gradients.
class GradientTape {
 public:
  explicit GradientTape(const ModelParams& params);

  // Encodes one sequence under each mask. Returns the slot id.
  std::size_t record(const Matrix& frames, std::span<const MaskVector> masks);

  std::size_t slots() const { return entries_.size(); }
  std::size_t samplings(std::size_t slot) const;
  const Vector& instance(std::size_t slot, std::size_t sampling) const;
  const Vector& projection(std::size_t slot, std::size_t sampling) const;

  // Adds dL/dv and dL/dz for one instance. Either may be empty (zero).
  void add_upstream(std::size_t slot, std::size_t sampling, const Vector& d_instance,
                    const Vector& d_projection);

  // Parameter gradients of everything passed to add_upstream.
  ModelParams backward() const;

  void clear();

 private:
  struct Entry {
    Matrix frames;       // f x K
    Matrix pre;          // f x H, W1 s
    Matrix hidden;       // f x H, relu(pre)
    std::vector<MaskVector> masks;
    std::vector<Vector> v;
    std::vector<Vector> z;
    std::vector<Vector> dv;
    std::vector<Vector> dz;
  };

  const Entry& entry(std::size_t slot) const;

  const ModelParams& params_;
  std::vector<Entry> entries_;
};

}  // namespace simmc
