#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pgen/corpus.hpp"
#include "pgen/decoding.hpp"
#include "pgen/error.hpp"
#include "pgen/metrics.hpp"
#include "pgen/model.hpp"
#include "pgen/optimizer.hpp"
#include "pgen/rng.hpp"
#include "pgen/schedule.hpp"

namespace pgen {

// The unified online-learning step. One rollout unrolls the decoder for
// exactly T steps (T = encoded target length, STOP included):
//
//   per step t: draw p1, p2 ~ U(0,1)
//     input  y~_{t-1} = START at t=1, else ground truth if p1 < alpha,
//                       else the previous decoded token
//     decode y^_t     = sample or argmax from the step distribution
//     target y~_t     = ground truth if p2 < beta, else y^_t
//     accumulate log pi(y~_t | state)
//
// The update ascends sum_t log pi(y~_t) * r, implemented as descent on the
// negated sum; r is a constant weight, never differentiated.
//
// Randomness is split into two derived streams so schedule draws never
// shift decode draws: p1/p2 come from rng.fork(kScheduleStream) and sample
// decoding consumes rng.fork(kDecodeStream), one uniform per step. With
// alpha = beta = 0 the decode stream reproduces
// sample_decode(params, config, example, rng.fork(kDecodeStream))
// token for token, STOP included.

enum class DecodeMode { kSample, kGreedy };

inline const char* decode_mode_name(DecodeMode m) {
  return m == DecodeMode::kSample ? "sample" : "greedy";
}

enum class RewardMode { kUnit, kRouge2Baseline };

enum class DatasetProfile { kQuora, kTwitter };

struct AlgorithmPreset {
  std::string name;
  ScheduleSpec alpha;
  ScheduleSpec beta;
  DecodeMode decode = DecodeMode::kSample;
  RewardMode reward_mode = RewardMode::kUnit;
  std::size_t n_samples = 1;

  void validate() const {
    alpha.validate();
    beta.validate();
    if (n_samples < 1) throw ConfigError("preset n_samples must be at least 1");
    if (reward_mode == RewardMode::kRouge2Baseline && n_samples < 2) {
      throw ConfigError("baseline reward needs a cohort of at least 2 samples");
    }
  }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "MLE", "REINFORCE", "REINFORCE-GTI", "REINFORCE-SO", "REINFORCE-SIO", "DAGGER", "DAGGER*"};
  return names;
}

// The seven presets. Decay constants: alpha exp-decay k=0.9999, beta
// inverse-sigmoid k=3000, both decaying to 0.
inline AlgorithmPreset preset_by_name(const std::string& name,
                                      DatasetProfile profile = DatasetProfile::kQuora) {
  AlgorithmPreset p;
  p.name = name;
  if (name == "MLE") {
    p.alpha = ScheduleSpec::constant(1.0);
    p.beta = ScheduleSpec::constant(1.0);
    p.decode = DecodeMode::kSample;
    p.reward_mode = RewardMode::kUnit;
  } else if (name == "REINFORCE") {
    p.alpha = ScheduleSpec::constant(0.0);
    p.beta = ScheduleSpec::constant(0.0);
    p.decode = DecodeMode::kSample;
    p.reward_mode = RewardMode::kRouge2Baseline;
    p.n_samples = 4;
  } else if (name == "REINFORCE-GTI") {
    p.alpha = ScheduleSpec::constant(1.0);
    p.beta = ScheduleSpec::constant(0.0);
    p.decode = DecodeMode::kSample;
    p.reward_mode = RewardMode::kRouge2Baseline;
    p.n_samples = 4;
  } else if (name == "REINFORCE-SO") {
    p.alpha = ScheduleSpec::constant(1.0);
    p.beta = ScheduleSpec::inv_sigmoid(3000.0);
    p.decode = DecodeMode::kSample;
    p.reward_mode = RewardMode::kRouge2Baseline;
    p.n_samples = 4;
  } else if (name == "REINFORCE-SIO") {
    p.alpha = ScheduleSpec::exp_decay(0.9999);
    p.beta = ScheduleSpec::inv_sigmoid(3000.0);
    p.decode = DecodeMode::kSample;
    p.reward_mode = RewardMode::kRouge2Baseline;
    p.n_samples = 4;
  } else if (name == "DAGGER") {
    p.alpha = ScheduleSpec::exp_decay(0.9999);
    p.beta = ScheduleSpec::constant(1.0);
    p.decode = DecodeMode::kGreedy;
    p.reward_mode = RewardMode::kUnit;
  } else if (name == "DAGGER*") {
    p.alpha = ScheduleSpec::constant(profile == DatasetProfile::kQuora ? 0.5 : 0.2);
    p.beta = ScheduleSpec::constant(1.0);
    p.decode = DecodeMode::kGreedy;
    p.reward_mode = RewardMode::kUnit;
  } else {
    throw ConfigError("unknown preset " + name);
  }
  p.validate();
  return p;
}

struct StepTrace {
  std::vector<int> inputs;       // y~_{t-1} actually fed, START first
  std::vector<int> decoded;      // y^ sequence
  std::vector<int> targets;      // y~ sequence (the loss targets)
  std::vector<double> log_probs; // log pi(y~_t) per step
  double total_log_prob = 0.0;
  Var total_log_prob_var;        // valid only for tape-based rollouts
};

inline StepTrace rollout(Tape& tape, const ModelVars& vars, const ModelConfig& config,
                         const EncoderStates& enc, const EncodedExample& example, double alpha,
                         double beta, DecodeMode decode, Rng& rng) {
  if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) {
    throw ContractError("rollout: schedule rates must lie in [0,1]");
  }
  if (example.tgt_ext_ids.empty()) throw ContractError("rollout: empty target");

  Rng sched = rng.fork(kScheduleStream);
  Rng dec = rng.fork(kDecodeStream);

  std::size_t T = example.tgt_ext_ids.size();
  StepTrace trace;
  trace.inputs.reserve(T);
  trace.decoded.reserve(T);
  trace.targets.reserve(T);
  trace.log_probs.reserve(T);

  DecoderState state = initial_decoder_state(tape, config, enc);
  Var total;
  for (std::size_t t = 0; t < T; ++t) {
    double p1 = sched.next_double();
    double p2 = sched.next_double();

    int input;
    if (t == 0) {
      input = kStart;
    } else if (p1 < alpha) {
      input = example.tgt_ext_ids[t - 1];
    } else {
      input = trace.decoded[t - 1];
    }

    StepOutput out = decoder_step(tape, vars, config, enc, state, input, example.src_ext_ids);
    state = out.state;
    const Array& dist = tape.value(out.dist);

    int decoded = decode == DecodeMode::kSample ? masked_sample(dist, dec.next_double())
                                                : masked_argmax(dist);
    int target = p2 < beta ? example.tgt_ext_ids[t] : decoded;

    Var lp = step_log_prob(tape, out.dist, target);
    total = t == 0 ? lp : tape.add(total, lp);

    trace.inputs.push_back(input);
    trace.decoded.push_back(decoded);
    trace.targets.push_back(target);
    trace.log_probs.push_back(tape.value(lp)[0]);
  }
  trace.total_log_prob = tape.value(total)[0];
  trace.total_log_prob_var = total;
  return trace;
}

inline StepTrace rollout(const ParameterStore& params, const ModelConfig& config,
                         const EncodedExample& example, double alpha, double beta,
                         DecodeMode decode, Rng& rng) {
  Tape tape;
  ModelVars vars = bind_params(tape, params);
  EncoderStates enc = encode_source(tape, vars, config, example.src_ids);
  return rollout(tape, vars, config, enc, example, alpha, beta, decode, rng);
}

// Sequence reward before centering: ROUGE-2 F1 of the trace's targets
// (truncated at the first STOP) against the ground truth without STOP,
// both as extended-id sequences.
inline double sequence_reward(const StepTrace& trace, const EncodedExample& example) {
  std::vector<int> produced;
  for (int id : trace.targets) {
    if (id == kStop) break;
    produced.push_back(id);
  }
  std::vector<int> reference;
  for (int id : example.tgt_ext_ids) {
    if (id == kStop) break;
    reference.push_back(id);
  }
  return rouge_n(produced, reference, 2).f1;
}

inline double compute_reward(const StepTrace& trace, const EncodedExample& example,
                             RewardMode mode, const std::vector<StepTrace>& cohort) {
  if (mode == RewardMode::kUnit) return 1.0;
  if (cohort.empty()) throw ContractError("compute_reward: baseline mode needs a cohort");
  double mean = 0.0;
  for (const StepTrace& peer : cohort) mean += sequence_reward(peer, example);
  mean /= static_cast<double>(cohort.size());
  return sequence_reward(trace, example) - mean;
}

// Deterministic evaluation loss: negative log-likelihood of the ground
// truth under teacher forcing. No tape gradients, no randomness.
inline double teacher_forcing_loss(const ParameterStore& params, const ModelConfig& config,
                                   const EncodedExample& example) {
  if (example.tgt_ext_ids.empty()) throw ContractError("teacher_forcing_loss: empty target");
  Tape tape;
  ModelVars vars = bind_params(tape, params);
  EncoderStates enc = encode_source(tape, vars, config, example.src_ids);
  DecoderState state = initial_decoder_state(tape, config, enc);
  double total = 0.0;
  for (std::size_t t = 0; t < example.tgt_ext_ids.size(); ++t) {
    int input = t == 0 ? kStart : example.tgt_ext_ids[t - 1];
    StepOutput out = decoder_step(tape, vars, config, enc, state, input, example.src_ext_ids);
    state = out.state;
    total += step_log_prob(tape.value(out.dist), example.tgt_ext_ids[t]);
  }
  return -total;
}

struct StepDiagnostics {
  std::size_t iteration = 0;
  std::string preset;
  double alpha = 0.0;
  double beta = 0.0;
  double loss = 0.0;         // descent objective: -(1/N) sum_i r_i * log pi_i
  double mean_reward = 0.0;  // cohort mean of the raw sequence reward (1 for unit mode)
  std::vector<double> rewards;  // centered weights actually applied
};

inline StepDiagnostics train_step(ParameterStore& params, const ModelConfig& config,
                                  const OptimizerSpec& opt_spec, OptimizerState& opt_state,
                                  const EncodedExample& example, const AlgorithmPreset& preset,
                                  std::size_t iteration, Rng& rng, double clip_norm = 2.0) {
  preset.validate();
  double alpha = rate(preset.alpha, iteration);
  double beta = rate(preset.beta, iteration);
  std::size_t n = preset.reward_mode == RewardMode::kUnit ? 1 : preset.n_samples;

  Tape tape;
  ModelVars vars = bind_params(tape, params);
  EncoderStates enc = encode_source(tape, vars, config, example.src_ids);

  std::vector<StepTrace> cohort;
  cohort.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng sample_rng = rng.fork(i);
    cohort.push_back(rollout(tape, vars, config, enc, example, alpha, beta, preset.decode,
                             sample_rng));
  }

  StepDiagnostics diag;
  diag.iteration = iteration;
  diag.preset = preset.name;
  diag.alpha = alpha;
  diag.beta = beta;
  diag.rewards.reserve(n);
  double raw_mean = 0.0;
  for (const StepTrace& trace : cohort) {
    diag.rewards.push_back(compute_reward(trace, example, preset.reward_mode, cohort));
    raw_mean += preset.reward_mode == RewardMode::kUnit ? 1.0 : sequence_reward(trace, example);
  }
  diag.mean_reward = raw_mean / static_cast<double>(n);

  Var loss;
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    Var term = tape.scale(cohort[i].total_log_prob_var, -diag.rewards[i] * inv_n);
    loss = i == 0 ? term : tape.add(loss, term);
  }
  diag.loss = tape.value(loss)[0];

  tape.backward(loss);
  GradMap grads = clip_gradients(collect_gradients(tape, vars, params), clip_norm);
  optimizer_step(params, grads, opt_spec, opt_state);
  return diag;
}

}  // namespace pgen
