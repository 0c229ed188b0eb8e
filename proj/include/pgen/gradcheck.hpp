#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pgen/corpus.hpp"
#include "pgen/learner.hpp"
#include "pgen/model.hpp"

namespace pgen {

// Central finite-difference verification of the full backward pass on a
// tiny model. The probe example routes gradient through every parameter
// group: the source carries an OOV (extended id = vocab_size) so the copy
// path is live, and the target mixes vocabulary and extended ids.

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool passed(double tol = 1e-4) const { return max_rel_err <= tol; }
};

inline EncodedExample gradcheck_example(std::size_t vocab_size) {
  EncodedExample ex;
  int v = static_cast<int>(vocab_size);
  ex.src_ids = {4, kUnk, 5, 6, 7};
  ex.src_ext_ids = {4, v, 5, 6, 7};
  ex.src_oovs = {"novel"};
  ex.tgt_ids = {5, kUnk, 4, kStop};
  ex.tgt_ext_ids = {5, v, 4, kStop};
  return ex;
}

inline GradCheckReport gradcheck(std::uint64_t seed = 11, double fd_step = 1e-5) {
  ModelConfig config;
  config.hidden_dim = 8;
  config.emb_dim = 4;
  config.vocab_size = 12;
  config.max_len = 10;
  ParameterStore params = init_params(config, seed);
  EncodedExample ex = gradcheck_example(config.vocab_size);

  Tape tape;
  ModelVars vars = bind_params(tape, params);
  EncoderStates enc = encode_source(tape, vars, config, ex.src_ids);
  Rng rng(1);
  StepTrace trace = rollout(tape, vars, config, enc, ex, 1.0, 1.0, DecodeMode::kGreedy, rng);
  Var loss = tape.neg(trace.total_log_prob_var);
  tape.backward(loss);
  GradMap analytic = collect_gradients(tape, vars, params);

  GradCheckReport report;
  for (auto& [name, grad] : analytic) {
    GradCheckEntry entry;
    entry.name = name;
    Array& theta = params.at(name);
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      double saved = theta[i];
      theta[i] = saved + fd_step;
      double up = teacher_forcing_loss(params, config, ex);
      theta[i] = saved - fd_step;
      double down = teacher_forcing_loss(params, config, ex);
      theta[i] = saved;
      double numeric = (up - down) / (2.0 * fd_step);
      double a = grad[i];
      double rel = std::fabs(a - numeric) / std::max(1e-4, std::fabs(a) + std::fabs(numeric));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pgen
