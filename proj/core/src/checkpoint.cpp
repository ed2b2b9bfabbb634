#include "simmc/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace simmc {

namespace {

constexpr std::array<char, 6> kMagic = {'S', 'I', 'M', 'M', 'C', '1'};

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(const std::vector<char>& in, std::size_t& pos) {
  if (in.size() - pos < 4) throw CheckpointError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  }
  pos += 4;
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const TrainConfig& config) {
  params.validate();
  std::vector<char> bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, static_cast<std::uint32_t>(params.hidden()));
  put_u32(bytes, static_cast<std::uint32_t>(params.input_dim()));
  put_u32(bytes, params.has_bias() ? 1u : 0u);
  for_each_block(params, [&](std::string_view, std::span<const double> values) {
    for (double x : values) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  });
  const std::string trailer = nlohmann::json(config).dump() + "\n";
  bytes.insert(bytes.end(), trailer.begin(), trailer.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Index> expected_hidden) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  std::size_t pos = kMagic.size();
  const std::uint32_t hidden = get_u32(bytes, pos);
  const std::uint32_t input = get_u32(bytes, pos);
  const std::uint32_t bias = get_u32(bytes, pos);
  if (hidden == 0 || input == 0 || bias > 1) {
    throw CheckpointError(path.string() + ": corrupt header");
  }
  if (expected_hidden && *expected_hidden != static_cast<Index>(hidden)) {
    throw CheckpointError(path.string() + ": checkpoint has H=" + std::to_string(hidden) +
                          " but H=" + std::to_string(*expected_hidden) + " was requested");
  }
  const std::uint64_t floats =
      static_cast<std::uint64_t>(hidden) * input + 2ull * hidden * hidden + (bias ? 3ull * hidden : 0);
  if ((bytes.size() - pos) / 4 < floats) throw CheckpointError(path.string() + ": checkpoint truncated");

  Checkpoint ck;
  ck.params = ModelParams::zeros(hidden, input, bias == 1);
  for_each_block(ck.params, [&](std::string_view, std::span<double> values) {
    for (double& x : values) x = static_cast<double>(std::bit_cast<float>(get_u32(bytes, pos)));
  });

  const std::string trailer(bytes.begin() + static_cast<long>(pos), bytes.end());
  if (trailer.empty()) throw CheckpointError(path.string() + ": checkpoint truncated (no trailer)");
  try {
    nlohmann::json::parse(trailer).get_to(ck.config);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad trailer: " + e.what());
  }
  if (ck.config.hidden != static_cast<int>(hidden)) {
    throw CheckpointError(path.string() + ": trailer disagrees with header on H");
  }
  if (!ck.params.all_finite()) throw CheckpointError(path.string() + ": non-finite weights");
  return ck;
}

}  // namespace simmc
