#pragma once

#include <cstdint>
#include <vector>

#include "simmc/types.hpp"

namespace simmc {

// Binary frame mask for one subsequence sampling. Ones mark surviving frames.
class MaskVector {
 public:
  MaskVector(std::vector<std::uint8_t> bits, int sampling_index);

  static MaskVector all_ones(int length, int sampling_index = 0);

  int length() const { return static_cast<int>(bits_.size()); }
  int masked() const { return masked_; }
  int kept() const { return length() - masked_; }
  int sampling_index() const { return sampling_; }
  bool keeps(int frame) const { return bits_[static_cast<std::size_t>(frame)] != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const MaskVector&, const MaskVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
  int masked_ = 0;
  int sampling_ = 0;
};

// Draws q independent masks of length f, each zeroing x positions chosen
// uniformly without replacement. Requires 0 <= x < f and q >= 1.
std::vector<MaskVector> sample_masks(int f, int x, int q, Rng& rng);

}  // namespace simmc
