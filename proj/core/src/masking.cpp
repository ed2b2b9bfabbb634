#include "simmc/masking.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace simmc {

MaskVector::MaskVector(std::vector<std::uint8_t> bits, int sampling_index)
    : bits_(std::move(bits)), sampling_(sampling_index) {
  int ones = 0;
  for (auto& b : bits_) {
    if (b > 1) throw std::invalid_argument("mask entries must be 0 or 1");
    ones += b;
  }
  if (ones == 0) throw std::invalid_argument("mask keeps no frames");
  masked_ = length() - ones;
}

MaskVector MaskVector::all_ones(int length, int sampling_index) {
  if (length < 1) throw std::invalid_argument("mask length must be >= 1");
  return MaskVector(std::vector<std::uint8_t>(static_cast<std::size_t>(length), 1),
                    sampling_index);
}

std::vector<MaskVector> sample_masks(int f, int x, int q, Rng& rng) {
  if (f < 1) throw std::invalid_argument("sequence length must be >= 1");
  if (x < 0 || x >= f) {
    throw std::invalid_argument("masked frame count " + std::to_string(x) +
                                " must lie in [0, " + std::to_string(f) + ")");
  }
  if (q < 1) throw std::invalid_argument("number of samplings must be >= 1");

  std::vector<MaskVector> masks;
  masks.reserve(static_cast<std::size_t>(q));
  std::vector<int> positions(static_cast<std::size_t>(f));
  for (int i = 0; i < q; ++i) {
    std::iota(positions.begin(), positions.end(), 0);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(f), 1);
    // Partial Fisher-Yates: the first x slots end up a uniform x-subset.
    for (int k = 0; k < x; ++k) {
      std::uniform_int_distribution<int> pick(k, f - 1);
      std::swap(positions[k], positions[pick(rng)]);
      bits[positions[k]] = 0;
    }
    masks.emplace_back(std::move(bits), i);
  }
  return masks;
}

}  // namespace simmc
