#include "simmc/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

namespace simmc {

namespace {

struct Flags {
  std::optional<std::string> profile;
  std::optional<int> epochs, batch, seq_len, stride, masks, samplings, hidden, min_pts,
      cluster_every, joints, identities, per_identity, features, prototypes, stream_len;
  std::optional<double> lr, temp, lambda, alpha, beta, eps_percentile, noise, tolerance, step;
  std::optional<std::string> eps, format;
  std::optional<std::uint64_t> seed;
  bool no_normalize = false;
  bool bias = false;
  bool baseline = false;
  bool corrupt = false;
  std::string data, checkpoint, out, cmc_out;
  std::string profile_dir;
};

void add_profile_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--profile", f.profile, "Dataset preset (profiles/<name>.json)");
  cmd->add_option("--profile-dir", f.profile_dir, "Directory holding profile files");
}

void add_data_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--data", f.data, "Directory with streams.csv and manifest.csv")->required();
  cmd->add_option("--seq-len", f.seq_len, "Frames per sequence (f)");
  cmd->add_option("--stride", f.stride, "Window stride in frames (default: f)");
}

void add_model_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--batch", f.batch, "Minibatch size in sequences");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--masks", f.masks, "Masked frames per sampling (x)");
  cmd->add_option("--samplings", f.samplings, "Subsequence samplings per sequence (q)");
  cmd->add_option("--hidden", f.hidden, "Embedding size (H)");
  cmd->add_option("--temp", f.temp, "Prototype softmax temperature");
  cmd->add_option("--lambda", f.lambda, "Weight of the intra-sequence loss");
  cmd->add_option("--alpha", f.alpha, "Intra-sequence weight of (z_i, v_j)");
  cmd->add_option("--beta", f.beta, "Intra-sequence weight of (z_j, v_i)");
  cmd->add_option("--eps", f.eps, "DBSCAN radius, a number or 'auto'");
  cmd->add_option("--min-pts", f.min_pts, "DBSCAN core-point threshold");
  cmd->add_option("--eps-percentile", f.eps_percentile, "Percentile used by --eps auto");
  cmd->add_option("--cluster-every", f.cluster_every, "Re-cluster every k epochs");
  cmd->add_flag("--no-normalize", f.no_normalize, "Use raw instance dot products");
  cmd->add_flag("--bias", f.bias, "Add bias vectors to every layer");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--out", f.out, "Checkpoint to write")->required();
}

template <typename T>
void set_if(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void apply_flags(RunConfig& cfg, const Flags& f) {
  TrainConfig& t = cfg.train;
  set_if(f.epochs, t.epochs);
  set_if(f.batch, t.batch_size);
  set_if(f.lr, t.adam.learning_rate);
  set_if(f.seq_len, t.seq_len);
  set_if(f.masks, t.masks);
  set_if(f.samplings, t.samplings);
  set_if(f.hidden, t.hidden);
  set_if(f.temp, t.loss.tau);
  set_if(f.lambda, t.loss.lambda);
  set_if(f.alpha, t.loss.alpha);
  set_if(f.beta, t.loss.beta);
  set_if(f.min_pts, t.cluster.min_pts);
  set_if(f.eps_percentile, t.cluster.eps_percentile);
  set_if(f.cluster_every, t.cluster_every);
  set_if(f.seed, t.seed);
  set_if(f.stride, cfg.stride);
  set_if(f.joints, cfg.joints);
  if (f.eps) {
    if (*f.eps == "auto") {
      t.cluster.eps.reset();
    } else {
      try {
        std::size_t used = 0;
        t.cluster.eps = std::stod(*f.eps, &used);
        if (used != f.eps->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ConfigError("--eps expects a number or 'auto', got '" + *f.eps + "'");
      }
    }
  }
  if (f.no_normalize) t.normalize = false;
  if (f.bias) t.bias = true;
  cfg.seq_len_given = cfg.seq_len_given || f.seq_len.has_value();
  if (f.hidden) cfg.expected_hidden = *f.hidden;
}

}  // namespace

std::string_view to_string(Subcommand cmd) {
  switch (cmd) {
    case Subcommand::train:
      return "train";
    case Subcommand::evaluate:
      return "evaluate";
    case Subcommand::finetune:
      return "finetune";
    case Subcommand::synth:
      return "synth";
    case Subcommand::gradcheck:
      return "gradcheck";
  }
  return "train";
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"event", "config"},
                   {"command", to_string(command)},
                   {"profile", profile ? nlohmann::json(*profile) : nlohmann::json(nullptr)}};
  switch (command) {
    case Subcommand::train:
    case Subcommand::finetune:
      j["train"] = train;
      j["stride"] = effective_stride();
      j["data"] = data_dir.string();
      j["out"] = out.string();
      break;
    case Subcommand::evaluate:
      j["checkpoint"] = checkpoint.string();
      j["data"] = data_dir.string();
      j["baseline"] = baseline;
      j["seq_len"] = seq_len_given ? nlohmann::json(train.seq_len) : nlohmann::json("checkpoint");
      j["stride"] = stride > 0 ? nlohmann::json(stride) : nlohmann::json("seq_len");
      j["cmc_out"] = cmc_out.string();
      break;
    case Subcommand::synth:
      j["synth"] = {{"identities", synth.num_identities},
                    {"per_identity", synth.sequences_per_identity},
                    {"joints", synth.joints},
                    {"seq_len", synth.seq_len},
                    {"stream_len", synth.stream_len},
                    {"noise", synth.noise_std},
                    {"seed", synth.seed},
                    {"format", synth_format == StreamFormat::skeleton ? "skeleton" : "features"}};
      j["out"] = out.string();
      break;
    case Subcommand::gradcheck:
      j["gradcheck"] = {{"features", gradcheck.input_dim},  {"hidden", gradcheck.hidden},
                        {"seq_len", gradcheck.seq_len},     {"masks", gradcheck.masks},
                        {"samplings", gradcheck.samplings}, {"batch", gradcheck.batch},
                        {"prototypes", gradcheck.prototypes}, {"temp", gradcheck.loss.tau},
                        {"lambda", gradcheck.loss.lambda},  {"alpha", gradcheck.loss.alpha},
                        {"beta", gradcheck.loss.beta},      {"normalize", gradcheck.normalize},
                        {"bias", gradcheck.bias},           {"step", gradcheck.step},
                        {"tolerance", gradcheck.tolerance}, {"seed", gradcheck.seed},
                        {"corrupt_gradient", gradcheck.corrupt_gradient}};
      break;
  }
  return j;
}

std::filesystem::path default_profile_dir() {
  if (const char* env = std::getenv("SIMMC_PROFILE_DIR")) return env;
  return SIMMC_DEFAULT_PROFILE_DIR;
}

std::vector<std::string> available_profiles(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

nlohmann::json load_profile(const std::string& name, const std::filesystem::path& dir) {
  const auto path = dir / (name + ".json");
  std::ifstream in(path);
  if (!in) {
    std::string known;
    for (const auto& p : available_profiles(dir)) known += (known.empty() ? "" : ", ") + p;
    throw ConfigError("unknown profile '" + name + "' (available: " + known + ")");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("profile " + path.string() + ": " + e.what());
  }
}

void apply_profile(RunConfig& cfg, const nlohmann::json& profile) {
  static const std::vector<std::string> kKnown = {
      "description", "epochs", "batch",     "lr",      "adam_beta1",   "adam_beta2",
      "adam_eps",    "seq_len", "masks",    "samplings", "hidden",     "bias",
      "normalize",   "cluster_every", "temp", "alpha",  "beta",         "lambda",
      "eps",         "eps_percentile", "min_pts", "seed", "joints",     "stride"};
  for (const auto& [key, value] : profile.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw ConfigError("profile key '" + key + "' is not a known setting");
    }
  }
  try {
    from_json(profile, cfg.train);
    if (profile.contains("joints")) profile.at("joints").get_to(cfg.joints);
    if (profile.contains("stride")) profile.at("stride").get_to(cfg.stride);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad profile value: ") + e.what());
  }
  if (profile.contains("seq_len")) cfg.seq_len_given = true;
}

RunConfig resolve_config(std::span<const std::string> args,
                         const std::filesystem::path& profile_dir) {
  CLI::App app{"Unsupervised skeleton representation learning and re-identification"};
  app.require_subcommand(1, 1);
  Flags f;

  auto* train = app.add_subcommand("train", "Train an encoder on unlabeled skeleton streams");
  add_profile_flags(train, f);
  add_data_flags(train, f);
  add_model_flags(train, f);

  auto* finetune =
      app.add_subcommand("finetune", "Train on pre-extracted per-frame feature streams");
  add_profile_flags(finetune, f);
  add_data_flags(finetune, f);
  add_model_flags(finetune, f);

  auto* evaluate = app.add_subcommand("evaluate", "Probe-to-gallery re-identification metrics");
  add_profile_flags(evaluate, f);
  evaluate->add_option("--checkpoint", f.checkpoint, "Trained checkpoint");
  evaluate->add_option("--data", f.data, "Directory with streams.csv and manifest.csv")
      ->required();
  evaluate->add_option("--seq-len", f.seq_len, "Frames per sequence (default: checkpoint's)");
  evaluate->add_option("--stride", f.stride, "Window stride in frames (default: f)");
  evaluate->add_option("--hidden", f.hidden, "Expected embedding size of the checkpoint");
  evaluate->add_flag("--baseline", f.baseline, "Match raw flattened coordinates instead");
  evaluate->add_option("--cmc-out", f.cmc_out, "CSV file for the full CMC curve");

  auto* synth = app.add_subcommand("synth", "Write a synthetic gait dataset");
  add_profile_flags(synth, f);
  synth->add_option("--out", f.out, "Output directory")->required();
  synth->add_option("--identities", f.identities, "Number of identities");
  synth->add_option("--per-identity", f.per_identity, "Streams per identity");
  synth->add_option("--joints", f.joints, "Joints per skeleton (J)");
  synth->add_option("--seq-len", f.seq_len, "Frames per stream");
  synth->add_option("--stream-len", f.stream_len,
                    "Frames per recording (default: one sequence's worth)");
  synth->add_option("--noise", f.noise, "Jitter std in meters (default 0.04)");
  synth->add_option("--seed", f.seed, "Random seed");
  synth->add_option("--format", f.format, "skeleton or features")
      ->check(CLI::IsMember({"skeleton", "features"}));

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  grad->add_option("--features", f.features, "Values per frame (K)");
  grad->add_option("--hidden", f.hidden, "Embedding size (H)");
  grad->add_option("--seq-len", f.seq_len, "Frames per sequence (f)");
  grad->add_option("--masks", f.masks, "Masked frames per sampling (x)");
  grad->add_option("--samplings", f.samplings, "Samplings (q)");
  grad->add_option("--batch", f.batch, "Sequences in the batch");
  grad->add_option("--prototypes", f.prototypes, "Prototypes per sampling");
  grad->add_option("--temp", f.temp, "Prototype softmax temperature");
  grad->add_option("--lambda", f.lambda, "Weight of the intra-sequence loss");
  grad->add_option("--alpha", f.alpha, "Intra-sequence weight of (z_i, v_j)");
  grad->add_option("--beta", f.beta, "Intra-sequence weight of (z_j, v_i)");
  grad->add_option("--step", f.step, "Central-difference step");
  grad->add_option("--tolerance", f.tolerance, "Maximum relative error");
  grad->add_option("--seed", f.seed, "Random seed");
  grad->add_flag("--bias", f.bias, "Add bias vectors to every layer");
  grad->add_flag("--no-normalize", f.no_normalize, "Use raw instance dot products");
  grad->add_flag("--corrupt-gradient", f.corrupt, "Negative control: perturb the W1 gradient");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = app.exit(e, out, err);
    if (code == 0) throw HelpRequested(out.str());
    throw ConfigError(err.str().empty() ? e.what() : err.str());
  }

  RunConfig cfg;
  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  cfg.command = name == "train"      ? Subcommand::train
                : name == "finetune" ? Subcommand::finetune
                : name == "evaluate" ? Subcommand::evaluate
                : name == "synth"    ? Subcommand::synth
                                     : Subcommand::gradcheck;

  if (cfg.command == Subcommand::gradcheck) {
    GradCheckConfig& g = cfg.gradcheck;
    set_if(f.features, g.input_dim);
    set_if(f.hidden, g.hidden);
    set_if(f.seq_len, g.seq_len);
    set_if(f.masks, g.masks);
    set_if(f.samplings, g.samplings);
    set_if(f.batch, g.batch);
    set_if(f.prototypes, g.prototypes);
    set_if(f.temp, g.loss.tau);
    set_if(f.lambda, g.loss.lambda);
    set_if(f.alpha, g.loss.alpha);
    set_if(f.beta, g.loss.beta);
    set_if(f.step, g.step);
    set_if(f.tolerance, g.tolerance);
    set_if(f.seed, g.seed);
    g.bias = f.bias;
    g.normalize = !f.no_normalize;
    g.corrupt_gradient = f.corrupt;
    try {
      g.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return cfg;
  }

  const std::filesystem::path dir = f.profile_dir.empty() ? profile_dir : std::filesystem::path(f.profile_dir);
  if (f.profile) {
    cfg.profile = *f.profile;
    apply_profile(cfg, load_profile(*f.profile, dir));
  }
  apply_flags(cfg, f);
  cfg.data_dir = f.data;
  cfg.checkpoint = f.checkpoint;
  cfg.out = f.out;
  cfg.cmc_out = f.cmc_out;
  cfg.baseline = f.baseline;

  if (cfg.command == Subcommand::evaluate && !cfg.baseline && cfg.checkpoint.empty()) {
    throw ConfigError("evaluate needs --checkpoint unless --baseline is given");
  }
  if (cfg.command == Subcommand::synth) {
    cfg.synth.joints = cfg.joints;
    cfg.synth.seq_len = cfg.train.seq_len;
    set_if(f.identities, cfg.synth.num_identities);
    set_if(f.per_identity, cfg.synth.sequences_per_identity);
    set_if(f.stream_len, cfg.synth.stream_len);
    cfg.synth.noise_std = f.noise.value_or(0.04);
    cfg.synth.seed = cfg.train.seed;
    if (f.format) {
      cfg.synth_format = *f.format == "features" ? StreamFormat::features : StreamFormat::skeleton;
    }
    try {
      cfg.synth.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return cfg;
  }
  if (cfg.stride < 0) throw ConfigError("--stride must be >= 1");
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace simmc
