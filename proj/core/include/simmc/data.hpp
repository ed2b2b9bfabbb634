#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simmc/types.hpp"

namespace simmc {

enum class Split { train, probe, gallery };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

// f x K frames of one sequence. Identity labels of training sequences are
// readable only outside a TrainingGuard scope.
class SkeletonSequence {
 public:
  SkeletonSequence(std::string id, Matrix frames, std::optional<int> identity, Split split);

  const std::string& id() const { return id_; }
  const Matrix& frames() const { return frames_; }
  Index length() const { return frames_.rows(); }
  Index feature_dim() const { return frames_.cols(); }
  Split split() const { return split_; }

  // Throws LabelAccessError for a train sequence while a TrainingGuard is live.
  std::optional<int> identity() const;

 private:
  std::string id_;
  Matrix frames_;
  std::optional<int> identity_;
  Split split_;
};

// Marks the current thread as running the unsupervised training path.
class TrainingGuard {
 public:
  TrainingGuard();
  ~TrainingGuard();
  TrainingGuard(const TrainingGuard&) = delete;
  TrainingGuard& operator=(const TrainingGuard&) = delete;

  static bool active();
};

enum class StreamFormat { skeleton, features };

// An unwindowed recording as stored on disk.
struct Stream {
  std::string id;
  Matrix frames;
  std::optional<int> identity;
  Split split = Split::train;
};

struct LoadReport {
  int streams_read = 0;
  int streams_skipped = 0;  // shorter than the window length
  StreamFormat format = StreamFormat::skeleton;
};

struct Dataset {
  std::vector<SkeletonSequence> train;
  std::vector<SkeletonSequence> probe;
  std::vector<SkeletonSequence> gallery;
  Index feature_dim = 0;
  Index seq_len = 0;
  LoadReport report;

  std::size_t size() const { return train.size() + probe.size() + gallery.size(); }

  // Throws FormatError when sequences disagree on f or K, or when a probe or
  // gallery sequence carries no identity.
  void validate() const;

  // Probe sequences whose identity never occurs in the gallery.
  int probes_without_gallery_match() const;
};

struct SynthConfig {
  int num_identities = 10;
  int sequences_per_identity = 20;
  int joints = 25;
  int seq_len = 6;
  int stream_len = 0;  // frames per stream; 0 means seq_len (one window each)
  double noise_std = 0.0;  // per-coordinate jitter; each frame also sways by 4x this
  std::uint64_t seed = 0;

  void validate() const;
};

// Cuts each stream into windows of seq_len frames, starting every stride
// frames. Trailing frames that do not fill a window are dropped.
Dataset window_streams(std::span<const Stream> streams, int seq_len, int stride);

std::vector<Stream> read_streams(const std::filesystem::path& stream_path,
                                 const std::filesystem::path& manifest_path,
                                 StreamFormat* detected_format = nullptr);

Dataset load_dataset(const std::filesystem::path& stream_path,
                     const std::filesystem::path& manifest_path, int seq_len, int stride);

void write_streams(std::span<const Stream> streams, const std::filesystem::path& stream_path,
                   const std::filesystem::path& manifest_path, StreamFormat format);

// Writes each sequence of the dataset as its own stream.
void write_dataset(const Dataset& dataset, const std::filesystem::path& stream_path,
                   const std::filesystem::path& manifest_path, StreamFormat format);

std::vector<Stream> synthetic_streams(const SynthConfig& cfg);
// synthetic_streams windowed with stride = seq_len.
Dataset generate_synthetic(const SynthConfig& cfg);

// Row-major flattening of the frame matrix (length f*K).
Vector baseline_representation(const SkeletonSequence& seq);

}  // namespace simmc
