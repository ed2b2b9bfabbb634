// simmc: train, fine-tune and evaluate skeleton re-identification encoders.
//
// Every record written to stdout is one JSON object per line; diagnostics go
// to stderr (SIMMC_LOG_LEVEL controls verbosity).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simmc/checkpoint.hpp"
#include "simmc/config.hpp"
#include "simmc/data.hpp"
#include "simmc/evaluator.hpp"
#include "simmc/gradcheck.hpp"
#include "simmc/log.hpp"
#include "simmc/trainer.hpp"

namespace fs = std::filesystem;

namespace {

void emit(const nlohmann::json& record) { std::cout << record.dump() << '\n' << std::flush; }

simmc::Dataset load_from_dir(const fs::path& dir, int seq_len, int stride) {
  return simmc::load_dataset(dir / "streams.csv", dir / "manifest.csv", seq_len, stride);
}

void write_cmc(const fs::path& path, const simmc::Metrics& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "k,accuracy\n";
  for (std::size_t k = 0; k < m.cmc.size(); ++k) out << k + 1 << ',' << m.cmc[k] << '\n';
}

void report_dataset(const simmc::Dataset& ds) {
  emit({{"event", "dataset"},
        {"train", ds.train.size()},
        {"probe", ds.probe.size()},
        {"gallery", ds.gallery.size()},
        {"seq_len", ds.seq_len},
        {"feature_dim", ds.feature_dim},
        {"streams", ds.report.streams_read},
        {"skipped_streams", ds.report.streams_skipped},
        {"format", ds.report.format == simmc::StreamFormat::skeleton ? "skeleton" : "features"}});
}

int run_train(const simmc::RunConfig& cfg) {
  const auto ds = load_from_dir(cfg.data_dir, cfg.train.seq_len, cfg.effective_stride());
  ds.validate();
  report_dataset(ds);
  if (cfg.command == simmc::Subcommand::finetune &&
      ds.report.format != simmc::StreamFormat::features) {
    std::cerr << "note: finetune input uses the skeleton format; treating coordinates as features\n";
  }
  const auto on_epoch = [](const simmc::EpochStats& s) { emit(s.to_json()); };
  const simmc::ModelParams params = cfg.command == simmc::Subcommand::finetune
                                        ? simmc::finetune(ds, cfg.train, on_epoch)
                                        : simmc::train_model(ds, cfg.train, on_epoch);
  emit({{"event", "model"},
        {"parameters", params.parameter_count()},
        {"hidden", params.hidden()},
        {"input_dim", params.input_dim()}});
  simmc::save_checkpoint(cfg.out, params, cfg.train);
  emit({{"event", "checkpoint"}, {"path", cfg.out.string()}});
  if (!ds.probe.empty() && !ds.gallery.empty()) {
    emit(simmc::evaluate(&params, ds, simmc::EvalMode::encoder).to_json());
  }
  return 0;
}

int run_evaluate(const simmc::RunConfig& cfg) {
  int seq_len = cfg.train.seq_len;
  std::optional<simmc::Checkpoint> ck;
  if (!cfg.checkpoint.empty() && !cfg.baseline) {
    ck = simmc::load_checkpoint(cfg.checkpoint, cfg.expected_hidden);
    if (!cfg.seq_len_given) seq_len = ck->config.seq_len;
  }
  const int stride = cfg.stride > 0 ? cfg.stride : seq_len;
  const auto ds = load_from_dir(cfg.data_dir, seq_len, stride);
  ds.validate();
  report_dataset(ds);
  const auto metrics = cfg.baseline
                           ? simmc::evaluate(nullptr, ds, simmc::EvalMode::baseline)
                           : simmc::evaluate(&ck->params, ds, simmc::EvalMode::encoder);
  auto record = metrics.to_json();
  record["mode"] = cfg.baseline ? "baseline" : "encoder";
  emit(record);
  const fs::path cmc_path = cfg.cmc_out.empty() ? fs::path("cmc.csv") : cfg.cmc_out;
  write_cmc(cmc_path, metrics);
  emit({{"event", "cmc_curve"}, {"path", cmc_path.string()}, {"points", metrics.cmc.size()}});
  return 0;
}

int run_synth(const simmc::RunConfig& cfg) {
  fs::create_directories(cfg.out);
  const auto streams = simmc::synthetic_streams(cfg.synth);
  simmc::write_streams(streams, cfg.out / "streams.csv", cfg.out / "manifest.csv",
                       cfg.synth_format);
  emit({{"event", "synth"}, {"streams", streams.size()}, {"out", cfg.out.string()}});
  return 0;
}

int run_gradcheck(const simmc::RunConfig& cfg) {
  const auto report = simmc::run_gradcheck(cfg.gradcheck);
  for (const auto& b : report.blocks) {
    std::cerr << b.name << ": max relative error " << b.max_rel_error
              << (b.passed ? "  ok" : "  FAIL") << '\n';
  }
  emit(report.to_json());
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  simmc::init_logging();
  const std::vector<std::string> args(argv + 1, argv + argc);
  simmc::RunConfig cfg;
  try {
    cfg = simmc::resolve_config(args);
  } catch (const simmc::HelpRequested& help) {
    std::cout << help.what();
    return 0;
  } catch (const simmc::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  emit(cfg.to_json());
  try {
    switch (cfg.command) {
      case simmc::Subcommand::train:
      case simmc::Subcommand::finetune:
        return run_train(cfg);
      case simmc::Subcommand::evaluate:
        return run_evaluate(cfg);
      case simmc::Subcommand::synth:
        return run_synth(cfg);
      case simmc::Subcommand::gradcheck:
        return run_gradcheck(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
