#include "simmc/encoder.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "simmc/data.hpp"

namespace simmc {

namespace {

Matrix glorot(Index rows, Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void check_input(const ModelParams& params, Index length) {
  if (length != params.input_dim()) {
    throw std::invalid_argument("frame has " + std::to_string(length) +
                                " values, encoder expects " + std::to_string(params.input_dim()));
  }
}

// W1 s (+ b1), the ReLU input.
Vector pre_activation(const ModelParams& p, const Eigen::Ref<const Vector>& s) {
  Vector a = p.w1 * s;
  if (p.has_bias()) a += p.b1;
  return a;
}

Vector output_layer(const ModelParams& p, const Vector& r) {
  Vector h = p.w2 * r;
  if (p.has_bias()) h += p.b2;
  return h;
}

}  // namespace

ModelParams ModelParams::zeros(Index hidden, Index input_dim, bool with_bias) {
  if (hidden < 1 || input_dim < 1) throw std::invalid_argument("model dimensions must be >= 1");
  ModelParams p;
  p.w1 = Matrix::Zero(hidden, input_dim);
  p.w2 = Matrix::Zero(hidden, hidden);
  p.wc = Matrix::Zero(hidden, hidden);
  if (with_bias) {
    p.b1 = Vector::Zero(hidden);
    p.b2 = Vector::Zero(hidden);
    p.bc = Vector::Zero(hidden);
  }
  return p;
}

ModelParams ModelParams::initialize(Index hidden, Index input_dim, bool with_bias, Rng& rng) {
  ModelParams p = zeros(hidden, input_dim, with_bias);
  p.w1 = glorot(hidden, input_dim, rng);
  p.w2 = glorot(hidden, hidden, rng);
  p.wc = glorot(hidden, hidden, rng);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + w2.size() + wc.size() + b1.size() + b2.size() +
                                  bc.size());
}

void ModelParams::validate() const {
  const Index h = hidden();
  if (h < 1 || input_dim() < 1) throw std::invalid_argument("empty encoder weights");
  if (w2.rows() != h || w2.cols() != h || wc.rows() != h || wc.cols() != h) {
    throw std::invalid_argument("W2 and Wc must be H x H");
  }
  const bool bias = b1.size() > 0 || b2.size() > 0 || bc.size() > 0;
  if (bias && (b1.size() != h || b2.size() != h || bc.size() != h)) {
    throw std::invalid_argument("bias vectors must all have length H");
  }
  if (!all_finite()) throw std::invalid_argument("non-finite parameter");
}

ModelParams ModelParams::zeros_like() const { return zeros(hidden(), input_dim(), has_bias()); }

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_block(*this, [&](std::string_view, std::span<const double> values) {
    for (double x : values) ok = ok && std::isfinite(x);
  });
  return ok;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.hidden() != b.hidden() || a.input_dim() != b.input_dim() ||
      a.has_bias() != b.has_bias()) {
    return false;
  }
  const auto bits_equal = [](const auto& x, const auto& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  return bits_equal(a.w1, b.w1) && bits_equal(a.w2, b.w2) && bits_equal(a.wc, b.wc) &&
         bits_equal(a.b1, b.b1) && bits_equal(a.b2, b.b2) && bits_equal(a.bc, b.bc);
}

void for_each_block(ModelParams& p,
                    const std::function<void(std::string_view, std::span<double>)>& fn) {
  fn("w1", {p.w1.data(), static_cast<std::size_t>(p.w1.size())});
  fn("w2", {p.w2.data(), static_cast<std::size_t>(p.w2.size())});
  fn("wc", {p.wc.data(), static_cast<std::size_t>(p.wc.size())});
  if (p.has_bias()) {
    fn("b1", {p.b1.data(), static_cast<std::size_t>(p.b1.size())});
    fn("b2", {p.b2.data(), static_cast<std::size_t>(p.b2.size())});
    fn("bc", {p.bc.data(), static_cast<std::size_t>(p.bc.size())});
  }
}

void for_each_block(const ModelParams& p,
                    const std::function<void(std::string_view, std::span<const double>)>& fn) {
  fn("w1", {p.w1.data(), static_cast<std::size_t>(p.w1.size())});
  fn("w2", {p.w2.data(), static_cast<std::size_t>(p.w2.size())});
  fn("wc", {p.wc.data(), static_cast<std::size_t>(p.wc.size())});
  if (p.has_bias()) {
    fn("b1", {p.b1.data(), static_cast<std::size_t>(p.b1.size())});
    fn("b2", {p.b2.data(), static_cast<std::size_t>(p.b2.size())});
    fn("bc", {p.bc.data(), static_cast<std::size_t>(p.bc.size())});
  }
}

Vector encode_frame(const ModelParams& params, const Eigen::Ref<const Vector>& s) {
  check_input(params, s.size());
  return output_layer(params, pre_activation(params, s).cwiseMax(0.0));
}

Matrix encode_frames(const ModelParams& params, const Matrix& frames) {
  check_input(params, frames.cols());
  Matrix out(frames.rows(), params.hidden());
  for (Index t = 0; t < frames.rows(); ++t) {
    const Vector s = frames.row(t).transpose();
    out.row(t) = encode_frame(params, s).transpose();
  }
  return out;
}

SkeletonInstance pool_instance(const Matrix& encoded, const MaskVector& mask) {
  if (mask.length() != encoded.rows()) {
    throw std::invalid_argument("mask length " + std::to_string(mask.length()) +
                                " does not match " + std::to_string(encoded.rows()) + " frames");
  }
  if (mask.kept() < 1) throw std::invalid_argument("mask keeps no frames");
  Vector sum = Vector::Zero(encoded.cols());
  for (int t = 0; t < mask.length(); ++t) {
    if (mask.keeps(t)) sum += encoded.row(t).transpose();
  }
  return SkeletonInstance{sum / static_cast<double>(mask.kept()), 0, mask.sampling_index()};
}

SkeletonInstance encode_sequence(const ModelParams& params, const SkeletonSequence& seq,
                                 const MaskVector& mask) {
  return pool_instance(encode_frames(params, seq.frames()), mask);
}

Vector project(const ModelParams& params, const Eigen::Ref<const Vector>& v) {
  if (v.size() != params.hidden()) {
    throw std::invalid_argument("projection input has " + std::to_string(v.size()) +
                                " values, expected " + std::to_string(params.hidden()));
  }
  Vector z = params.wc * v;
  if (params.has_bias()) z += params.bc;
  return z;
}

GradientTape::GradientTape(const ModelParams& params) : params_(params) {}

std::size_t GradientTape::record(const Matrix& frames, std::span<const MaskVector> masks) {
  check_input(params_, frames.cols());
  if (masks.empty()) throw std::invalid_argument("record needs at least one mask");
  Entry e;
  e.frames = frames;
  e.pre.resize(frames.rows(), params_.hidden());
  e.hidden.resize(frames.rows(), params_.hidden());
  Matrix encoded(frames.rows(), params_.hidden());
  for (Index t = 0; t < frames.rows(); ++t) {
    const Vector s = frames.row(t).transpose();
    const Vector a = pre_activation(params_, s);
    const Vector r = a.cwiseMax(0.0);
    e.pre.row(t) = a.transpose();
    e.hidden.row(t) = r.transpose();
    encoded.row(t) = output_layer(params_, r).transpose();
  }
  e.masks.assign(masks.begin(), masks.end());
  for (const auto& m : masks) {
    e.v.push_back(pool_instance(encoded, m).v);
    e.z.push_back(project(params_, e.v.back()));
    e.dv.push_back(Vector::Zero(params_.hidden()));
    e.dz.push_back(Vector::Zero(params_.hidden()));
  }
  entries_.push_back(std::move(e));
  return entries_.size() - 1;
}

const GradientTape::Entry& GradientTape::entry(std::size_t slot) const {
  if (slot >= entries_.size()) {
    throw StateError("tape has no recorded activations for slot " + std::to_string(slot));
  }
  return entries_[slot];
}

std::size_t GradientTape::samplings(std::size_t slot) const { return entry(slot).masks.size(); }

const Vector& GradientTape::instance(std::size_t slot, std::size_t sampling) const {
  return entry(slot).v.at(sampling);
}

const Vector& GradientTape::projection(std::size_t slot, std::size_t sampling) const {
  return entry(slot).z.at(sampling);
}

void GradientTape::add_upstream(std::size_t slot, std::size_t sampling, const Vector& d_instance,
                                const Vector& d_projection) {
  entry(slot);
  Entry& e = entries_[slot];
  if (sampling >= e.masks.size()) throw StateError("sampling index out of range");
  if (d_instance.size() > 0) e.dv[sampling] += d_instance;
  if (d_projection.size() > 0) e.dz[sampling] += d_projection;
}

ModelParams GradientTape::backward() const {
  if (entries_.empty()) throw StateError("backward called on an empty tape");
  ModelParams g = params_.zeros_like();
  const bool bias = params_.has_bias();
  for (const Entry& e : entries_) {
    const Index f = e.frames.rows();
    Matrix d_encoded = Matrix::Zero(f, params_.hidden());
    for (std::size_t i = 0; i < e.masks.size(); ++i) {
      Vector dv = e.dv[i];
      if (!e.dz[i].isZero(0.0)) {
        g.wc.noalias() += e.dz[i] * e.v[i].transpose();
        if (bias) g.bc += e.dz[i];
        dv.noalias() += params_.wc.transpose() * e.dz[i];
      }
      const double share = 1.0 / static_cast<double>(e.masks[i].kept());
      for (int t = 0; t < f; ++t) {
        if (e.masks[i].keeps(t)) d_encoded.row(t) += share * dv.transpose();
      }
    }
    g.w2.noalias() += d_encoded.transpose() * e.hidden;
    if (bias) g.b2 += d_encoded.colwise().sum().transpose();
    Matrix d_pre = d_encoded * params_.w2;
    // relu'(0) := 0
    d_pre.array() *= (e.pre.array() > 0.0).cast<double>();
    g.w1.noalias() += d_pre.transpose() * e.frames;
    if (bias) g.b1 += d_pre.colwise().sum().transpose();
  }
  return g;
}

void GradientTape::clear() { entries_.clear(); }

}  // namespace simmc
