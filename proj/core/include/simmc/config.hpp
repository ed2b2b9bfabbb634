#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simmc/data.hpp"
#include "simmc/gradcheck.hpp"
#include "simmc/trainer.hpp"

namespace simmc {

enum class Subcommand { train, evaluate, finetune, synth, gradcheck };

std::string_view to_string(Subcommand cmd);

// Fully resolved run configuration: defaults, then the profile, then flags.
struct RunConfig {
  Subcommand command = Subcommand::train;
  std::optional<std::string> profile;
  TrainConfig train;
  SynthConfig synth;
  GradCheckConfig gradcheck;
  StreamFormat synth_format = StreamFormat::skeleton;
  int joints = 25;  // J for the parameter-count report (K = 3J)
  int stride = 0;   // window stride; 0 means seq_len
  std::filesystem::path data_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::filesystem::path cmc_out;
  std::optional<int> expected_hidden;  // evaluate: reject checkpoints of other H
  bool seq_len_given = false;
  bool baseline = false;

  int effective_stride() const { return stride > 0 ? stride : train.seq_len; }
  nlohmann::json to_json() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --help / --version: the text to print, exit status 0.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SIMMC_PROFILE_DIR if set, else the profiles/ directory of the source tree.
std::filesystem::path default_profile_dir();

std::vector<std::string> available_profiles(const std::filesystem::path& dir);

// Reads <dir>/<name>.json. Throws ConfigError for unknown names.
nlohmann::json load_profile(const std::string& name, const std::filesystem::path& dir);

// Overlays profile keys onto cfg. Unknown keys are rejected.
void apply_profile(RunConfig& cfg, const nlohmann::json& profile);

// args excludes the program name.
RunConfig resolve_config(std::span<const std::string> args,
                         const std::filesystem::path& profile_dir = default_profile_dir());

}  // namespace simmc
