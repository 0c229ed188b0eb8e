#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pgen/checkpoint.hpp"
#include "pgen/config.hpp"
#include "pgen/corpus.hpp"
#include "pgen/decoding.hpp"
#include "pgen/error.hpp"
#include "pgen/learner.hpp"
#include "pgen/metrics.hpp"
#include "pgen/model.hpp"
#include "pgen/optimizer.hpp"
#include "pgen/rng.hpp"
#include "pgen/schedule.hpp"

namespace pgen {

// Experiment orchestration. Training is online (per example, batch_size
// consecutive steps per iteration, default 1), with validation-based
// checkpointing: pretrain keeps the lowest validation teacher-forcing
// loss, finetune keeps the highest validation metric average.

struct TrainConfig {
  ModelConfig model;
  OptimizerSpec optimizer = OptimizerSpec::adagrad();
  std::string train_path;
  std::string val_path;
  std::string test_path;
  std::string vocab_path = "vocab.tsv";
  std::string checkpoint_path = "model.ckpt";
  std::string init_checkpoint;   // finetune input
  std::string records_path;      // validation records CSV, optional
  std::string diagnostics_path;  // per-step diagnostics CSV, optional
  std::size_t eval_every = 1000;
  std::size_t max_iterations = 3000;
  std::size_t batch_size = 1;
  std::size_t vocab_cap = 5000;
  std::size_t val_limit = 0;  // 0 = whole validation set
  std::uint64_t seed = 7;
  double clip_norm = 2.0;
  DatasetProfile profile = DatasetProfile::kQuora;

  void validate() const {
    model.validate();
    optimizer.validate();
    if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (train_path.empty() || val_path.empty()) {
      throw ConfigError("train_path and val_path are required");
    }
  }
};

struct RunRecord {
  std::size_t iteration = 0;
  double train_loss = 0.0;  // mean step loss since the previous record
  double val_loss = 0.0;
  MetricReport val_metrics;  // all zero when only loss is validated
  double wall_clock_s = 0.0; // informational; never serialized
};

inline double validation_loss(const ParameterStore& params, const ModelConfig& config,
                              const std::vector<EncodedExample>& examples, std::size_t limit) {
  if (examples.empty()) throw ContractError("validation_loss: empty validation set");
  std::size_t n = limit ? std::min(limit, examples.size()) : examples.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += teacher_forcing_loss(params, config, examples[i]);
  return total / static_cast<double>(n);
}

// Decodes the validation set (greedy for beam 1) and scores the
// detokenized candidates against the reference targets.
inline MetricReport validation_metrics(const ParameterStore& params, const ModelConfig& config,
                                       const Vocabulary& vocab,
                                       const std::vector<EncodedExample>& examples,
                                       const std::vector<SentencePair>& pairs, std::size_t limit,
                                       std::size_t beam = 1) {
  if (examples.size() != pairs.size()) {
    throw ContractError("validation_metrics: examples and pairs misaligned");
  }
  if (examples.empty()) throw ContractError("validation_metrics: empty validation set");
  std::size_t n = limit ? std::min(limit, examples.size()) : examples.size();
  std::vector<std::vector<std::string>> cands, refs;
  cands.reserve(n);
  refs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> ids = beam <= 1 ? greedy_decode(params, config, examples[i])
                                     : beam_search(params, config, examples[i], beam);
    cands.push_back(decode_tokens(ids, vocab, examples[i].src_oovs));
    refs.push_back(pairs[i].target);
  }
  return evaluate_corpus<std::string>(cands, refs);
}

namespace detail {

inline std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

inline void write_records_csv(const std::string& path, const std::vector<RunRecord>& records) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "iteration,train_loss,val_loss,rouge1,rouge2,bleu2,avg\n";
  for (const RunRecord& r : records) {
    out << r.iteration << ',' << format_double("%.6f", r.train_loss) << ','
        << format_double("%.6f", r.val_loss) << ',' << format_double("%.2f", r.val_metrics.rouge1)
        << ',' << format_double("%.2f", r.val_metrics.rouge2) << ','
        << format_double("%.2f", r.val_metrics.bleu2) << ','
        << format_double("%.2f", r.val_metrics.avg) << '\n';
  }
}

inline void write_diagnostics_csv(const std::string& path,
                                  const std::vector<StepDiagnostics>& steps) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "iter,preset,alpha,beta,loss,mean_reward\n";
  for (const StepDiagnostics& d : steps) {
    out << d.iteration << ',' << d.preset << ',' << format_double("%.6f", d.alpha) << ','
        << format_double("%.6f", d.beta) << ',' << format_double("%.6f", d.loss) << ','
        << format_double("%.6f", d.mean_reward) << '\n';
  }
}

// Shared pretrain/finetune loop. select_score maps a fresh validation
// record to a score where higher is better; the best-scoring parameters
// are kept and written to checkpoint_path.
template <class Validate>
std::string run_training(const TrainConfig& cfg, const ModelConfig& model,
                         ParameterStore params, const OptimizerSpec& opt_spec,
                         const AlgorithmPreset& preset,
                         const std::vector<EncodedExample>& train, Validate&& validate,
                         std::vector<RunRecord>* records_out,
                         std::vector<StepDiagnostics>* diagnostics_out) {
  if (train.empty()) throw ContractError("training set is empty");
  OptimizerState opt_state;
  Rng root(cfg.seed);
  std::vector<RunRecord> records;
  std::vector<StepDiagnostics> diagnostics;
  auto t0 = std::chrono::steady_clock::now();

  double best_score = -std::numeric_limits<double>::infinity();
  double window_sum = 0.0;
  std::size_t window_n = 0;
  std::size_t last_validated = static_cast<std::size_t>(-1);

  auto validate_now = [&](std::size_t iteration) {
    RunRecord rec;
    rec.iteration = iteration;
    rec.train_loss = window_n ? window_sum / static_cast<double>(window_n) : 0.0;
    double score = validate(params, rec);
    rec.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(rec);
    if (score > best_score) {
      best_score = score;
      save_checkpoint(cfg.checkpoint_path, model, params);
    }
    window_sum = 0.0;
    window_n = 0;
    last_validated = iteration;
  };

  validate_now(0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t epoch = static_cast<std::size_t>(-1);
  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      std::size_t cursor = iter * cfg.batch_size + b;
      std::size_t want_epoch = cursor / train.size();
      if (want_epoch != epoch) {
        epoch = want_epoch;
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = root.fork(1000 + epoch);
        shuffle_rng.shuffle(order);
      }
      const EncodedExample& ex = train[order[cursor % train.size()]];
      Rng step_rng = root.fork(10000 + cursor);
      StepDiagnostics diag = train_step(params, model, opt_spec, opt_state, ex, preset, iter,
                                        step_rng, cfg.clip_norm);
      window_sum += diag.loss;
      ++window_n;
      diagnostics.push_back(std::move(diag));
    }
    if ((iter + 1) % cfg.eval_every == 0) validate_now(iter + 1);
  }
  if (last_validated != cfg.max_iterations) validate_now(cfg.max_iterations);

  write_records_csv(cfg.records_path, records);
  write_diagnostics_csv(cfg.diagnostics_path, diagnostics);
  if (records_out) *records_out = std::move(records);
  if (diagnostics_out) *diagnostics_out = std::move(diagnostics);
  return cfg.checkpoint_path;
}

}  // namespace detail

// MLE pretraining. Builds the vocabulary from the training pairs (capped),
// dumps it next to the checkpoint, and keeps the parameters with the
// lowest validation teacher-forcing loss.
inline std::string pretrain(const TrainConfig& cfg, std::vector<RunRecord>* records_out = nullptr,
                            std::vector<StepDiagnostics>* diagnostics_out = nullptr) {
  cfg.validate();
  std::vector<SentencePair> train_pairs = load_pairs(cfg.train_path);
  std::vector<SentencePair> val_pairs = load_pairs(cfg.val_path);
  Vocabulary vocab = build_vocab(train_pairs, cfg.vocab_cap);
  vocab.dump_file(cfg.vocab_path);

  ModelConfig model = cfg.model;
  model.vocab_size = vocab.size();
  model.validate();

  std::vector<EncodedExample> train, val;
  train.reserve(train_pairs.size());
  for (const auto& p : train_pairs) train.push_back(encode(p, vocab, model.max_len));
  val.reserve(val_pairs.size());
  for (const auto& p : val_pairs) val.push_back(encode(p, vocab, model.max_len));

  ParameterStore params = init_params(model, cfg.seed);
  AlgorithmPreset preset = preset_by_name("MLE", cfg.profile);

  auto validate = [&](const ParameterStore& p, RunRecord& rec) {
    rec.val_loss = validation_loss(p, model, val, cfg.val_limit);
    return -rec.val_loss;  // lower loss is better
  };
  return detail::run_training(cfg, model, std::move(params), cfg.optimizer, preset, train,
                              validate, records_out, diagnostics_out);
}

// Fine-tuning under a preset. Loads the pretrain checkpoint and vocabulary,
// switches to Adam, restarts the schedule iteration counter at 0, and keeps
// the parameters with the highest validation metric average.
inline std::string finetune(const TrainConfig& cfg, const AlgorithmPreset& preset,
                            std::vector<RunRecord>* records_out = nullptr,
                            std::vector<StepDiagnostics>* diagnostics_out = nullptr) {
  cfg.validate();
  preset.validate();
  if (cfg.init_checkpoint.empty() || !std::filesystem::exists(cfg.init_checkpoint)) {
    throw ConfigError("finetune requires an existing pretrain checkpoint (init_checkpoint)");
  }
  auto [model, params] = load_checkpoint(cfg.init_checkpoint);
  Vocabulary vocab = Vocabulary::load_file(cfg.vocab_path);
  if (vocab.size() != model.vocab_size) {
    throw ContractError("vocabulary size " + std::to_string(vocab.size()) +
                        " does not match checkpoint vocab_size " +
                        std::to_string(model.vocab_size));
  }

  std::vector<SentencePair> train_pairs = load_pairs(cfg.train_path);
  std::vector<SentencePair> val_pairs = load_pairs(cfg.val_path);
  std::vector<EncodedExample> train, val;
  train.reserve(train_pairs.size());
  for (const auto& p : train_pairs) train.push_back(encode(p, vocab, model.max_len));
  val.reserve(val_pairs.size());
  for (const auto& p : val_pairs) val.push_back(encode(p, vocab, model.max_len));

  OptimizerSpec opt = cfg.optimizer.kind == OptimizerSpec::Kind::kAdam ? cfg.optimizer
                                                                       : OptimizerSpec::adam();

  auto validate = [&](const ParameterStore& p, RunRecord& rec) {
    rec.val_loss = validation_loss(p, model, val, cfg.val_limit);
    rec.val_metrics = validation_metrics(p, model, vocab, val, val_pairs, cfg.val_limit);
    return rec.val_metrics.avg;
  };
  return detail::run_training(cfg, model, std::move(params), opt, preset, train, validate,
                              records_out, diagnostics_out);
}

inline MetricReport evaluate_params(const ParameterStore& params, const ModelConfig& model,
                                    const Vocabulary& vocab,
                                    const std::vector<SentencePair>& pairs, std::size_t beam = 8,
                                    std::size_t limit = 0) {
  if (pairs.empty()) throw ContractError("evaluate: empty test set");
  std::size_t n = limit ? std::min(limit, pairs.size()) : pairs.size();
  std::vector<std::vector<std::string>> cands, refs;
  cands.reserve(n);
  refs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    EncodedExample ex = encode(pairs[i], vocab, model.max_len);
    std::vector<int> ids = beam <= 1 ? greedy_decode(params, model, ex)
                                     : beam_search(params, model, ex, beam);
    cands.push_back(decode_tokens(ids, vocab, ex.src_oovs));
    refs.push_back(pairs[i].target);
  }
  return evaluate_corpus<std::string>(cands, refs);
}

// Beam-decodes the test pairs under a stored checkpoint.
inline MetricReport evaluate(const std::string& checkpoint_path, const std::string& vocab_path,
                             const std::string& test_path, std::size_t beam = 8,
                             std::size_t limit = 0) {
  auto [model, params] = load_checkpoint(checkpoint_path);
  Vocabulary vocab = Vocabulary::load_file(vocab_path);
  return evaluate_params(params, model, vocab, load_pairs(test_path), beam, limit);
}

// One detokenized output sentence per input line, order preserved; empty
// input lines produce empty output lines.
inline std::size_t generate(const std::string& checkpoint_path, const std::string& vocab_path,
                            const std::string& input_path, const std::string& output_path,
                            std::size_t beam = 8) {
  auto [model, params] = load_checkpoint(checkpoint_path);
  Vocabulary vocab = Vocabulary::load_file(vocab_path);
  std::ifstream in(input_path);
  if (!in) throw IoError("cannot open " + input_path);
  std::ofstream out(output_path);
  if (!out) throw IoError("cannot open " + output_path + " for writing");
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> source = tokenize(line);
    if (source.empty()) {
      out << '\n';
      continue;
    }
    EncodedExample ex = encode(SentencePair{std::move(source), {}}, vocab, model.max_len);
    std::vector<int> ids = beam <= 1 ? greedy_decode(params, model, ex)
                                     : beam_search(params, model, ex, beam);
    out << detokenize(decode_tokens(ids, vocab, ex.src_oovs)) << '\n';
    ++count;
  }
  return count;
}

// One grid line per sweep point: whitespace-separated `alpha=SPEC` /
// `beta=SPEC` assignments; a bare SPEC is an alpha assignment.
inline AlgorithmPreset apply_grid_line(const AlgorithmPreset& base, const std::string& line) {
  AlgorithmPreset p = base;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    if (tok.rfind("alpha=", 0) == 0) {
      p.alpha = parse_schedule(tok.substr(6));
    } else if (tok.rfind("beta=", 0) == 0) {
      p.beta = parse_schedule(tok.substr(5));
    } else {
      p.alpha = parse_schedule(tok);
    }
  }
  p.validate();
  return p;
}

// Fine-tunes once per grid point from the same pretrain checkpoint and
// reports test metrics per setting.
inline std::string sweep(const TrainConfig& cfg, const AlgorithmPreset& base_preset,
                         const std::vector<std::string>& grid_lines,
                         const std::string& out_csv_path, std::size_t beam = 8) {
  if (cfg.test_path.empty()) throw ConfigError("sweep requires test_path");
  std::ostringstream csv;
  csv << "setting,rouge1,rouge2,bleu2,avg\n";
  std::vector<SentencePair> test_pairs;
  if (!grid_lines.empty()) test_pairs = load_pairs(cfg.test_path);
  for (std::size_t i = 0; i < grid_lines.size(); ++i) {
    AlgorithmPreset preset = apply_grid_line(base_preset, grid_lines[i]);
    TrainConfig point = cfg;
    point.checkpoint_path = cfg.checkpoint_path + ".sweep" + std::to_string(i);
    if (!cfg.records_path.empty()) {
      point.records_path = cfg.records_path + ".sweep" + std::to_string(i);
    }
    if (!cfg.diagnostics_path.empty()) {
      point.diagnostics_path = cfg.diagnostics_path + ".sweep" + std::to_string(i);
    }
    std::string ckpt = finetune(point, preset);
    auto [model, params] = load_checkpoint(ckpt);
    Vocabulary vocab = Vocabulary::load_file(point.vocab_path);
    MetricReport m = evaluate_params(params, model, vocab, test_pairs, beam);
    csv << grid_lines[i] << ',' << detail::format_double("%.2f", m.rouge1) << ','
        << detail::format_double("%.2f", m.rouge2) << ','
        << detail::format_double("%.2f", m.bleu2) << ','
        << detail::format_double("%.2f", m.avg) << '\n';
  }
  std::string text = csv.str();
  if (!out_csv_path.empty()) {
    std::ofstream out(out_csv_path);
    if (!out) throw IoError("cannot open " + out_csv_path + " for writing");
    out << text;
  }
  return text;
}

}  // namespace pgen
