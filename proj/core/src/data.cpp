#include "simmc/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <cstdio>

#include <spdlog/spdlog.h>

namespace simmc {

namespace {

thread_local int g_training_depth = 0;

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) {
      f.remove_suffix(1);
    }
  }
  return fields;
}

[[noreturn]] void parse_fail(const std::filesystem::path& file, std::size_t line,
                             const std::string& what) {
  throw ParseError(file.string() + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view text, const std::filesystem::path& file, std::size_t line,
               std::string_view field) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    parse_fail(file, line, "bad " + std::string(field) + " '" + std::string(text) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      parse_fail(file, line, "non-finite " + std::string(field));
    }
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct ManifestEntry {
  std::optional<int> identity;
  Split split;
};

std::map<std::string, ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty manifest");
  ++line_no;
  const auto header = split_csv(line);
  if (header.size() != 3 || header[0] != "seq_id" || header[1] != "identity" ||
      header[2] != "split") {
    parse_fail(path, line_no, "expected header seq_id,identity,split");
  }
  std::map<std::string, ManifestEntry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3) parse_fail(path, line_no, "expected 3 fields");
    ManifestEntry entry{};
    if (!fields[1].empty()) {
      const int id = parse_number<int>(fields[1], path, line_no, "identity");
      if (id < 0) parse_fail(path, line_no, "identity must be non-negative");
      entry.identity = id;
    }
    try {
      entry.split = parse_split(fields[2]);
    } catch (const std::invalid_argument& e) {
      parse_fail(path, line_no, e.what());
    }
    if (entry.split != Split::train && !entry.identity) {
      parse_fail(path, line_no, "probe/gallery rows need an identity");
    }
    if (!entries.emplace(std::string(fields[0]), entry).second) {
      parse_fail(path, line_no, "duplicate seq_id '" + std::string(fields[0]) + "'");
    }
  }
  return entries;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::probe:
      return "probe";
    case Split::gallery:
      return "gallery";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "probe") return Split::probe;
  if (text == "gallery") return Split::gallery;
  throw std::invalid_argument("unknown split '" + std::string(text) + "'");
}

SkeletonSequence::SkeletonSequence(std::string id, Matrix frames, std::optional<int> identity,
                                   Split split)
    : id_(std::move(id)), frames_(std::move(frames)), identity_(identity), split_(split) {
  if (frames_.rows() < 1 || frames_.cols() < 1) {
    throw std::invalid_argument("sequence '" + id_ + "' needs at least one frame and feature");
  }
  if (!frames_.allFinite()) {
    throw std::invalid_argument("sequence '" + id_ + "' has non-finite values");
  }
  if (identity_ && *identity_ < 0) {
    throw std::invalid_argument("sequence '" + id_ + "' has a negative identity");
  }
}

std::optional<int> SkeletonSequence::identity() const {
  if (split_ == Split::train && TrainingGuard::active()) {
    throw LabelAccessError("identity of training sequence '" + id_ +
                           "' read on the training path");
  }
  return identity_;
}

TrainingGuard::TrainingGuard() { ++g_training_depth; }
TrainingGuard::~TrainingGuard() { --g_training_depth; }
bool TrainingGuard::active() { return g_training_depth > 0; }

void Dataset::validate() const {
  const auto check = [&](const std::vector<SkeletonSequence>& seqs) {
    for (const auto& s : seqs) {
      if (s.length() != seq_len || s.feature_dim() != feature_dim) {
        throw FormatError("sequence '" + s.id() + "' is " + std::to_string(s.length()) + "x" +
                          std::to_string(s.feature_dim()) + ", dataset expects " +
                          std::to_string(seq_len) + "x" + std::to_string(feature_dim));
      }
      if (s.split() != Split::train && !s.identity()) {
        throw FormatError("sequence '" + s.id() + "' has no identity");
      }
    }
  };
  check(train);
  check(probe);
  check(gallery);
}

int Dataset::probes_without_gallery_match() const {
  std::set<int> gallery_ids;
  for (const auto& g : gallery) gallery_ids.insert(*g.identity());
  return static_cast<int>(std::count_if(probe.begin(), probe.end(), [&](const auto& p) {
    return !gallery_ids.contains(*p.identity());
  }));
}

void SynthConfig::validate() const {
  if (num_identities < 2) throw std::invalid_argument("synth: num_identities must be >= 2");
  if (sequences_per_identity < 1) {
    throw std::invalid_argument("synth: sequences_per_identity must be >= 1");
  }
  if (joints < 1) throw std::invalid_argument("synth: joints must be >= 1");
  if (seq_len < 1) throw std::invalid_argument("synth: seq_len must be >= 1");
  if (stream_len != 0 && stream_len < seq_len) {
    throw std::invalid_argument("synth: stream_len must be 0 or >= seq_len");
  }
  if (!(noise_std >= 0.0)) throw std::invalid_argument("synth: noise_std must be >= 0");
}

Dataset window_streams(std::span<const Stream> streams, int seq_len, int stride) {
  if (seq_len < 1) throw std::invalid_argument("seq_len must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  Dataset out;
  out.seq_len = seq_len;
  for (const auto& stream : streams) {
    if (out.feature_dim == 0) out.feature_dim = stream.frames.cols();
    if (stream.frames.cols() != out.feature_dim) {
      throw FormatError("stream '" + stream.id + "' has " + std::to_string(stream.frames.cols()) +
                        " features, expected " + std::to_string(out.feature_dim));
    }
    ++out.report.streams_read;
    const Index len = stream.frames.rows();
    if (len < seq_len) {
      ++out.report.streams_skipped;
      continue;
    }
    const Index windows = (len - seq_len) / stride + 1;
    auto& dest = stream.split == Split::train     ? out.train
                 : stream.split == Split::probe ? out.probe
                                                : out.gallery;
    for (Index w = 0; w < windows; ++w) {
      const Index start = w * stride;
      std::string id = windows == 1 ? stream.id : stream.id + "@" + std::to_string(start);
      dest.emplace_back(std::move(id), Matrix(stream.frames.middleRows(start, seq_len)),
                        stream.identity, stream.split);
    }
  }
  if (out.report.streams_skipped > 0) {
    spdlog::warn("skipped {} stream(s) shorter than {} frames", out.report.streams_skipped,
                 seq_len);
  }
  return out;
}

std::vector<Stream> read_streams(const std::filesystem::path& stream_path,
                                 const std::filesystem::path& manifest_path,
                                 StreamFormat* detected_format) {
  const auto manifest = read_manifest(manifest_path);

  std::ifstream in(stream_path);
  if (!in) throw ParseError("cannot open stream file " + stream_path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) parse_fail(stream_path, 1, "empty stream file");
  const auto header = split_csv(line);

  StreamFormat format;
  Index width = 0;
  if (header.size() == 6 && header[0] == "seq_id" && header[1] == "frame_idx" &&
      header[2] == "joint_idx" && header[3] == "x" && header[4] == "y" && header[5] == "z") {
    format = StreamFormat::skeleton;
  } else if (header.size() >= 3 && header[0] == "seq_id" && header[1] == "frame_idx") {
    format = StreamFormat::features;
    width = static_cast<Index>(header.size()) - 2;
    for (Index d = 0; d < width; ++d) {
      if (header[d + 2] != "f" + std::to_string(d)) {
        parse_fail(stream_path, 1, "feature columns must be f0..f" + std::to_string(width - 1));
      }
    }
  } else {
    parse_fail(stream_path, 1,
               "expected header seq_id,frame_idx,joint_idx,x,y,z or seq_id,frame_idx,f0,...");
  }
  if (detected_format) *detected_format = format;

  // Skeleton rows arrive per joint in any order, so joints are gathered
  // sparsely and the joint count is fixed once all rows are seen.
  std::map<std::string, std::map<long, std::map<long, std::array<double, 3>>>> joints;
  std::map<std::string, std::map<long, std::vector<double>>> features;
  std::vector<std::string> order;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    const std::string seq_id(fields[0]);
    if (seq_id.empty()) parse_fail(stream_path, line_no, "empty seq_id");
    if (format == StreamFormat::skeleton) {
      if (fields.size() != 6) parse_fail(stream_path, line_no, "expected 6 fields");
      const auto frame = parse_number<long>(fields[1], stream_path, line_no, "frame_idx");
      const auto joint = parse_number<long>(fields[2], stream_path, line_no, "joint_idx");
      if (frame < 0 || joint < 0) parse_fail(stream_path, line_no, "negative index");
      std::array<double, 3> xyz{};
      for (int a = 0; a < 3; ++a) {
        xyz[a] = parse_number<double>(fields[3 + a], stream_path, line_no, "coordinate");
      }
      auto [it, fresh] = joints.try_emplace(seq_id);
      if (fresh && !features.contains(seq_id)) order.push_back(seq_id);
      if (!it->second[frame].emplace(joint, xyz).second) {
        parse_fail(stream_path, line_no, "duplicate (seq_id, frame_idx, joint_idx)");
      }
    } else {
      if (static_cast<Index>(fields.size()) != width + 2) {
        parse_fail(stream_path, line_no, "expected " + std::to_string(width + 2) + " fields");
      }
      const auto frame = parse_number<long>(fields[1], stream_path, line_no, "frame_idx");
      if (frame < 0) parse_fail(stream_path, line_no, "negative frame_idx");
      std::vector<double> row(width);
      for (Index d = 0; d < width; ++d) {
        row[d] = parse_number<double>(fields[d + 2], stream_path, line_no, "feature");
      }
      auto [it, fresh] = features.try_emplace(seq_id);
      if (fresh) order.push_back(seq_id);
      if (!it->second.emplace(frame, std::move(row)).second) {
        parse_fail(stream_path, line_no, "duplicate (seq_id, frame_idx)");
      }
    }
  }

  std::vector<Stream> streams;
  Index expected_dim = 0;
  for (const auto& seq_id : order) {
    const auto meta = manifest.find(seq_id);
    if (meta == manifest.end()) {
      throw FormatError(stream_path.string() + ": stream '" + seq_id + "' missing from manifest");
    }
    Matrix frames;
    if (format == StreamFormat::skeleton) {
      const auto& by_frame = joints.at(seq_id);
      const long num_frames = static_cast<long>(by_frame.size());
      if (by_frame.rbegin()->first != num_frames - 1) {
        throw FormatError("stream '" + seq_id + "' has gaps in frame_idx");
      }
      const long num_joints = static_cast<long>(by_frame.begin()->second.size());
      frames.resize(num_frames, 3 * num_joints);
      for (const auto& [frame, js] : by_frame) {
        if (static_cast<long>(js.size()) != num_joints || js.rbegin()->first != num_joints - 1) {
          throw FormatError("stream '" + seq_id + "' frame " + std::to_string(frame) +
                            " does not list joints 0.." + std::to_string(num_joints - 1));
        }
        for (const auto& [j, xyz] : js) {
          for (int a = 0; a < 3; ++a) frames(frame, 3 * j + a) = xyz[a];
        }
      }
    } else {
      const auto& by_frame = features.at(seq_id);
      const long num_frames = static_cast<long>(by_frame.size());
      if (by_frame.rbegin()->first != num_frames - 1) {
        throw FormatError("stream '" + seq_id + "' has gaps in frame_idx");
      }
      frames.resize(num_frames, width);
      for (const auto& [frame, row] : by_frame) {
        frames.row(frame) = Eigen::Map<const Vector>(row.data(), width).transpose();
      }
    }
    if (expected_dim == 0) expected_dim = frames.cols();
    if (frames.cols() != expected_dim) {
      throw FormatError("stream '" + seq_id + "' has " + std::to_string(frames.cols()) +
                        " values per frame, expected " + std::to_string(expected_dim));
    }
    streams.push_back(Stream{seq_id, std::move(frames), meta->second.identity, meta->second.split});
  }
  return streams;
}

Dataset load_dataset(const std::filesystem::path& stream_path,
                     const std::filesystem::path& manifest_path, int seq_len, int stride) {
  if (seq_len < 1) throw std::invalid_argument("seq_len must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  StreamFormat format{};
  const auto streams = read_streams(stream_path, manifest_path, &format);
  Dataset ds = window_streams(streams, seq_len, stride);
  ds.report.format = format;
  return ds;
}

void write_streams(std::span<const Stream> streams, const std::filesystem::path& stream_path,
                   const std::filesystem::path& manifest_path, StreamFormat format) {
  std::ofstream out(stream_path);
  if (!out) throw std::runtime_error("cannot write " + stream_path.string());
  std::ofstream man(manifest_path);
  if (!man) throw std::runtime_error("cannot write " + manifest_path.string());

  Index width = streams.empty() ? 0 : streams.front().frames.cols();
  if (format == StreamFormat::skeleton) {
    out << "seq_id,frame_idx,joint_idx,x,y,z\n";
  } else {
    out << "seq_id,frame_idx";
    for (Index d = 0; d < width; ++d) out << ",f" << d;
    out << '\n';
  }
  man << "seq_id,identity,split\n";

  for (const auto& s : streams) {
    if (s.frames.cols() != width) {
      throw FormatError("stream '" + s.id + "' width differs from the first stream");
    }
    if (format == StreamFormat::skeleton && width % 3 != 0) {
      throw FormatError("skeleton streams need 3 values per joint");
    }
    for (Index t = 0; t < s.frames.rows(); ++t) {
      if (format == StreamFormat::skeleton) {
        for (Index j = 0; j < width / 3; ++j) {
          out << s.id << ',' << t << ',' << j;
          for (int a = 0; a < 3; ++a) out << ',' << format_double(s.frames(t, 3 * j + a));
          out << '\n';
        }
      } else {
        out << s.id << ',' << t;
        for (Index d = 0; d < width; ++d) out << ',' << format_double(s.frames(t, d));
        out << '\n';
      }
    }
    man << s.id << ',' << (s.identity ? std::to_string(*s.identity) : std::string()) << ','
        << to_string(s.split) << '\n';
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& stream_path,
                   const std::filesystem::path& manifest_path, StreamFormat format) {
  std::vector<Stream> streams;
  streams.reserve(dataset.size());
  for (const auto* part : {&dataset.train, &dataset.probe, &dataset.gallery}) {
    for (const auto& s : *part) {
      streams.push_back(Stream{s.id(), s.frames(), s.identity(), s.split()});
    }
  }
  write_streams(streams, stream_path, manifest_path, format);
}

std::vector<Stream> synthetic_streams(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index coords = 3 * static_cast<Index>(cfg.joints);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  constexpr double kSwayScale = 4.0;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Shared body template: joints stacked along the vertical axis with a
  // small lateral spread.
  Vector body(coords);
  for (Index j = 0; j < cfg.joints; ++j) {
    body(3 * j + 0) = 0.15 * std::sin(1.7 * static_cast<double>(j));
    body(3 * j + 1) = 1.8 * static_cast<double>(j) / std::max(1, cfg.joints - 1) - 0.9;
    body(3 * j + 2) = 0.05 * std::cos(0.9 * static_cast<double>(j));
  }

  std::vector<Stream> streams;
  streams.reserve(static_cast<std::size_t>(cfg.num_identities) * cfg.sequences_per_identity);
  const int n_train = cfg.sequences_per_identity / 2;
  const int n_probe = (cfg.sequences_per_identity - n_train) / 2;
  const Index length = cfg.stream_len > 0 ? cfg.stream_len : cfg.seq_len;

  for (int person = 0; person < cfg.num_identities; ++person) {
    // Anthropometric traits: overall scale plus a per-coordinate offset.
    const double scale = 0.9 + 0.2 * unit(rng);
    Vector base(coords);
    for (Index c = 0; c < coords; ++c) base(c) = scale * body(c) + 0.08 * gauss(rng);
    // Gait: per-coordinate amplitude and phase, one cadence per identity.
    Vector amplitude(coords);
    Vector phase(coords);
    for (Index c = 0; c < coords; ++c) {
      amplitude(c) = 0.01 + 0.02 * unit(rng);
      phase(c) = kTwoPi * unit(rng);
    }
    const double omega = kTwoPi / (5.0 + 3.0 * unit(rng));

    for (int k = 0; k < cfg.sequences_per_identity; ++k) {
      const double offset = kTwoPi * unit(rng);
      Matrix frames(length, coords);
      for (Index t = 0; t < length; ++t) {
        // Whole-body sway: one random translation per frame.
        double sway[3];
        for (double& v : sway) v = kSwayScale * cfg.noise_std * gauss(rng);
        for (Index c = 0; c < coords; ++c) {
          double value =
              base(c) + amplitude(c) * std::sin(omega * static_cast<double>(t) + phase(c) + offset);
          value += sway[c % 3];
          if (cfg.noise_std > 0.0) value += cfg.noise_std * gauss(rng);
          frames(t, c) = value;
        }
      }
      const Split split = k < n_train ? Split::train
                          : k < n_train + n_probe ? Split::probe
                                                  : Split::gallery;
      char id[48];
      std::snprintf(id, sizeof(id), "p%03d_s%03d", person, k);
      streams.push_back(Stream{id, std::move(frames), person, split});
    }
  }
  return streams;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  const auto streams = synthetic_streams(cfg);
  return window_streams(streams, cfg.seq_len, cfg.seq_len);
}

Vector baseline_representation(const SkeletonSequence& seq) {
  const Matrix& m = seq.frames();
  return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace simmc
