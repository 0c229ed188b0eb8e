// Command-line front end: pretrain, finetune, evaluate, generate, synth,
// sweep, gradcheck. Settings come from an optional key=value config file;
// explicitly passed flags override file values.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgen/pgen.hpp"

namespace {

struct FlagSpec {
  std::string key;    // config key the flag overrides
  std::string value;  // textual value as passed
  bool set = false;
};

// Registers a string-valued flag whose presence overrides config key `key`.
CLI::Option* add_override(CLI::App* cmd, std::vector<FlagSpec>& flags, const std::string& name,
                          const std::string& key, const std::string& help) {
  flags.push_back({key, "", false});
  FlagSpec& slot = flags.back();
  return cmd->add_option_function<std::string>(
      name,
      [&slot](const std::string& v) {
        slot.value = v;
        slot.set = true;
      },
      help);
}

pgen::KeyValues collect(const std::string& config_path, const std::vector<FlagSpec>& flags) {
  pgen::KeyValues kv;
  if (!config_path.empty()) kv = pgen::parse_config_file(config_path);
  for (const FlagSpec& f : flags) {
    if (f.set) kv[f.key] = f.value;
  }
  return kv;
}

pgen::DatasetProfile parse_profile(const std::string& name) {
  if (name == "quora") return pgen::DatasetProfile::kQuora;
  if (name == "twitter") return pgen::DatasetProfile::kTwitter;
  throw pgen::ConfigError("unknown dataset profile " + name + " (expected quora or twitter)");
}

pgen::TrainConfig train_config_from(const pgen::KeyValues& kv, bool finetune_phase) {
  pgen::TrainConfig cfg;
  cfg.train_path = pgen::config_get(kv, "train", "");
  cfg.val_path = pgen::config_get(kv, "val", "");
  cfg.test_path = pgen::config_get(kv, "test", "");
  cfg.vocab_path = pgen::config_get(kv, "vocab", "vocab.tsv");
  cfg.checkpoint_path = pgen::config_get(kv, "checkpoint", "model.ckpt");
  cfg.init_checkpoint = pgen::config_get(kv, "init", "");
  cfg.records_path = pgen::config_get(kv, "records", "");
  cfg.diagnostics_path = pgen::config_get(kv, "diagnostics", "");
  cfg.eval_every = pgen::config_get_u64(kv, "eval_every", finetune_phase ? 10 : 1000);
  cfg.max_iterations = pgen::config_get_u64(kv, "iterations", finetune_phase ? 500 : 3000);
  cfg.batch_size = pgen::config_get_u64(kv, "batch", 1);
  cfg.vocab_cap = pgen::config_get_u64(kv, "vocab_cap", 5000);
  cfg.val_limit = pgen::config_get_u64(kv, "val_limit", 0);
  cfg.seed = pgen::config_get_u64(kv, "seed", 7);
  cfg.clip_norm = pgen::config_get_double(kv, "clip", 2.0);
  cfg.profile = parse_profile(pgen::config_get(kv, "profile", "quora"));
  cfg.model.hidden_dim = pgen::config_get_u64(kv, "hidden", cfg.model.hidden_dim);
  cfg.model.emb_dim = pgen::config_get_u64(kv, "emb", cfg.model.emb_dim);
  cfg.model.max_len = pgen::config_get_u64(kv, "max_len", cfg.model.max_len);
  cfg.optimizer = finetune_phase
                      ? pgen::OptimizerSpec::adam(pgen::config_get_double(kv, "lr", 1e-5))
                      : pgen::OptimizerSpec::adagrad(pgen::config_get_double(kv, "lr", 0.15));
  return cfg;
}

void add_train_flags(CLI::App* cmd, std::vector<FlagSpec>& flags) {
  add_override(cmd, flags, "--train", "train", "training pairs TSV");
  add_override(cmd, flags, "--val", "val", "validation pairs TSV");
  add_override(cmd, flags, "--test", "test", "test pairs TSV");
  add_override(cmd, flags, "--vocab", "vocab", "vocabulary dump path");
  add_override(cmd, flags, "--checkpoint", "checkpoint", "output checkpoint path");
  add_override(cmd, flags, "--records", "records", "validation records CSV path");
  add_override(cmd, flags, "--diagnostics", "diagnostics", "per-step diagnostics CSV path");
  add_override(cmd, flags, "--iterations", "iterations", "training iterations");
  add_override(cmd, flags, "--eval-every", "eval_every", "validation interval");
  add_override(cmd, flags, "--batch", "batch", "examples per iteration");
  add_override(cmd, flags, "--vocab-cap", "vocab_cap", "maximum vocabulary size");
  add_override(cmd, flags, "--val-limit", "val_limit", "validation examples used (0 = all)");
  add_override(cmd, flags, "--seed", "seed", "random seed");
  add_override(cmd, flags, "--clip", "clip", "gradient clip norm");
  add_override(cmd, flags, "--lr", "lr", "learning rate");
  add_override(cmd, flags, "--hidden", "hidden", "hidden state width");
  add_override(cmd, flags, "--emb", "emb", "embedding width");
  add_override(cmd, flags, "--max-len", "max_len", "maximum sequence length");
  add_override(cmd, flags, "--profile", "profile", "dataset profile: quora or twitter");
}

std::vector<std::string> read_grid_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pgen::IoError("cannot open grid file " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t')) {
      trimmed.erase(trimmed.begin());
    }
    if (trimmed.empty() || trimmed[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointer-generator training laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key=value config file (flags override)")
      ->envname("PGEN_CONFIG");

  std::vector<FlagSpec> flags;
  flags.reserve(128);

  CLI::App* cmd_pretrain = app.add_subcommand("pretrain", "MLE pre-training");
  add_train_flags(cmd_pretrain, flags);

  CLI::App* cmd_finetune = app.add_subcommand("finetune", "fine-tune under a preset");
  add_train_flags(cmd_finetune, flags);
  add_override(cmd_finetune, flags, "--init", "init", "pretrain checkpoint to start from");
  add_override(cmd_finetune, flags, "--preset", "preset", "algorithm preset name");
  add_override(cmd_finetune, flags, "--alpha", "alpha", "alpha schedule override, e.g. exp:0.9999");
  add_override(cmd_finetune, flags, "--beta", "beta", "beta schedule override, e.g. sig:3000");

  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "beam-decode a test set and score it");
  add_override(cmd_evaluate, flags, "--checkpoint", "checkpoint", "checkpoint to evaluate");
  add_override(cmd_evaluate, flags, "--vocab", "vocab", "vocabulary path");
  add_override(cmd_evaluate, flags, "--test", "test", "test pairs TSV");
  add_override(cmd_evaluate, flags, "--beam", "beam", "beam size");
  add_override(cmd_evaluate, flags, "--limit", "limit", "test examples used (0 = all)");

  CLI::App* cmd_generate = app.add_subcommand("generate", "decode raw input lines");
  add_override(cmd_generate, flags, "--checkpoint", "checkpoint", "checkpoint to decode with");
  add_override(cmd_generate, flags, "--vocab", "vocab", "vocabulary path");
  add_override(cmd_generate, flags, "--input", "input", "input file, one source per line");
  add_override(cmd_generate, flags, "--output", "output", "output file");
  add_override(cmd_generate, flags, "--beam", "beam", "beam size");

  CLI::App* cmd_synth = app.add_subcommand("synth", "write a synthetic corpus");
  add_override(cmd_synth, flags, "--task", "task", "substitution, copy, or reverse");
  add_override(cmd_synth, flags, "--size", "size", "number of pairs");
  add_override(cmd_synth, flags, "--seed", "seed", "random seed");
  add_override(cmd_synth, flags, "--vocab-size", "synth_vocab", "surface token count");
  add_override(cmd_synth, flags, "--max-len", "synth_max_len", "maximum sentence length");
  add_override(cmd_synth, flags, "--out", "out", "output TSV path");

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "fine-tune across a schedule grid");
  add_train_flags(cmd_sweep, flags);
  add_override(cmd_sweep, flags, "--init", "init", "pretrain checkpoint to start from");
  add_override(cmd_sweep, flags, "--preset", "preset", "base preset name");
  add_override(cmd_sweep, flags, "--grid", "grid", "grid file, one setting per line");
  add_override(cmd_sweep, flags, "--out", "out", "output CSV path");
  add_override(cmd_sweep, flags, "--beam", "beam", "evaluation beam size");

  CLI::App* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_override(cmd_gradcheck, flags, "--seed", "seed", "parameter init seed");

  CLI11_PARSE(app, argc, argv);

  try {
    pgen::KeyValues kv = collect(config_path, flags);

    if (cmd_pretrain->parsed()) {
      pgen::TrainConfig cfg = train_config_from(kv, false);
      std::string path = pgen::pretrain(cfg);
      std::cout << "checkpoint " << path << "\n";
    } else if (cmd_finetune->parsed()) {
      pgen::TrainConfig cfg = train_config_from(kv, true);
      std::string name = pgen::config_get(kv, "preset", "");
      if (name.empty()) throw pgen::ConfigError("finetune requires --preset");
      pgen::AlgorithmPreset preset = pgen::preset_by_name(name, cfg.profile);
      if (kv.count("alpha")) preset.alpha = pgen::parse_schedule(kv.at("alpha"));
      if (kv.count("beta")) preset.beta = pgen::parse_schedule(kv.at("beta"));
      preset.validate();
      std::string path = pgen::finetune(cfg, preset);
      std::cout << "checkpoint " << path << "\n";
    } else if (cmd_evaluate->parsed()) {
      pgen::MetricReport m = pgen::evaluate(
          pgen::config_get(kv, "checkpoint", "model.ckpt"),
          pgen::config_get(kv, "vocab", "vocab.tsv"), pgen::config_get(kv, "test", ""),
          pgen::config_get_u64(kv, "beam", 8), pgen::config_get_u64(kv, "limit", 0));
      std::printf("rouge1,rouge2,bleu2,avg\n%.2f,%.2f,%.2f,%.2f\n", m.rouge1, m.rouge2, m.bleu2,
                  m.avg);
    } else if (cmd_generate->parsed()) {
      std::size_t n = pgen::generate(
          pgen::config_get(kv, "checkpoint", "model.ckpt"),
          pgen::config_get(kv, "vocab", "vocab.tsv"), pgen::config_get(kv, "input", ""),
          pgen::config_get(kv, "output", "generated.txt"), pgen::config_get_u64(kv, "beam", 8));
      std::cout << "decoded " << n << " lines\n";
    } else if (cmd_synth->parsed()) {
      pgen::SynthTask task =
          pgen::parse_synth_task(pgen::config_get(kv, "task", "substitution"));
      auto pairs = pgen::synth_corpus(task, pgen::config_get_u64(kv, "synth_vocab", 50),
                                      pgen::config_get_u64(kv, "size", 1000),
                                      pgen::config_get_u64(kv, "synth_max_len", 10),
                                      pgen::config_get_u64(kv, "seed", 7));
      std::string out = pgen::config_get(kv, "out", "synth.tsv");
      pgen::write_pairs(out, pairs);
      std::cout << "wrote " << pairs.size() << " pairs to " << out << "\n";
    } else if (cmd_sweep->parsed()) {
      pgen::TrainConfig cfg = train_config_from(kv, true);
      std::string name = pgen::config_get(kv, "preset", "DAGGER");
      pgen::AlgorithmPreset preset = pgen::preset_by_name(name, cfg.profile);
      std::string grid_path = pgen::config_get(kv, "grid", "");
      if (grid_path.empty()) throw pgen::ConfigError("sweep requires --grid");
      std::string csv = pgen::sweep(cfg, preset, read_grid_lines(grid_path),
                                    pgen::config_get(kv, "out", "sweep.csv"),
                                    pgen::config_get_u64(kv, "beam", 8));
      std::cout << csv;
    } else if (cmd_gradcheck->parsed()) {
      pgen::GradCheckReport report = pgen::gradcheck(pgen::config_get_u64(kv, "seed", 11));
      for (const auto& e : report.entries) {
        std::printf("%-12s max_rel_err %.3e\n", e.name.c_str(), e.max_rel_err);
      }
      std::printf("overall      max_rel_err %.3e (%s)\n", report.max_rel_err,
                  report.passed() ? "pass" : "FAIL");
      return report.passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
