#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "pgen/array.hpp"
#include "pgen/corpus.hpp"
#include "pgen/error.hpp"
#include "pgen/model.hpp"
#include "pgen/rng.hpp"

namespace pgen {

// Test-time generation: greedy argmax, ancestral sampling, and beam search
// without length normalization. PAD and START are masked at decode time;
// STOP terminates a sequence and is excluded from the returned ids.
//
// The generic entry points take a policy object so toy distribution tables
// can exercise the search logic:
//   struct Policy {
//     using State = ...;
//     State start();
//     std::pair<State, Array> step(const State&, int input_id);  // -> dist
//   };

inline bool decode_allowed(int id) { return id != kPad && id != kStart; }

// Lowest id wins ties; strictly-greater replacement keeps that ordering.
inline int masked_argmax(const Array& dist) {
  int best = -1;
  double best_p = -1.0;
  for (std::size_t i = 0; i < dist.numel(); ++i) {
    if (!decode_allowed(static_cast<int>(i))) continue;
    if (dist[i] > best_p) {
      best_p = dist[i];
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw DecodeError("masked_argmax: no admissible token");
  return best;
}

// Inverse-CDF over the masked distribution in ascending id order; u is one
// uniform draw from [0,1). Masked mass is renormalized away by scaling u.
inline int masked_sample(const Array& dist, double u) {
  double total = 0.0;
  for (std::size_t i = 0; i < dist.numel(); ++i) {
    if (decode_allowed(static_cast<int>(i))) total += dist[i];
  }
  if (total <= 0.0) throw DecodeError("masked_sample: no admissible mass");
  double target = u * total;
  double cum = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < dist.numel(); ++i) {
    if (!decode_allowed(static_cast<int>(i))) continue;
    cum += dist[i];
    last = static_cast<int>(i);
    if (cum > target) return last;
  }
  return last;
}

template <class Policy>
std::vector<int> greedy_decode_policy(Policy& policy, std::size_t max_len) {
  typename Policy::State state = policy.start();
  std::vector<int> out;
  int prev = kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto [next_state, dist] = policy.step(state, prev);
    int tok = masked_argmax(dist);
    if (tok == kStop) break;
    out.push_back(tok);
    prev = tok;
    state = std::move(next_state);
  }
  return out;
}

// One uniform is consumed per step, including the terminating STOP step.
template <class Policy>
std::vector<int> sample_decode_policy(Policy& policy, std::size_t max_len, Rng& rng) {
  typename Policy::State state = policy.start();
  std::vector<int> out;
  int prev = kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto [next_state, dist] = policy.step(state, prev);
    int tok = masked_sample(dist, rng.next_double());
    if (tok == kStop) break;
    out.push_back(tok);
    prev = tok;
    state = std::move(next_state);
  }
  return out;
}

template <class State>
struct Hypothesis {
  std::vector<int> tokens;  // extended ids; ends with STOP iff finished
  double log_prob = 0.0;    // sum of step_log_prob over tokens
  State state{};
  bool finished = false;
};

struct DecodeResult {
  std::vector<int> tokens;  // STOP stripped
  double log_prob = 0.0;
  bool finished = false;
};

template <class Policy>
DecodeResult beam_search_policy(Policy& policy, std::size_t beam, std::size_t max_len,
                                bool length_normalize = false) {
  if (beam < 1) throw ConfigError("beam_search: beam must be at least 1");
  using Hyp = Hypothesis<typename Policy::State>;

  std::vector<Hyp> live(1);
  live[0].state = policy.start();
  std::vector<Hyp> finished;

  struct Candidate {
    double score;
    int token;
    std::size_t parent;
  };

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<typename Policy::State> next_states(live.size());
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      int prev = live[i].tokens.empty() ? kStart : live[i].tokens.back();
      auto [next_state, dist] = policy.step(live[i].state, prev);
      next_states[i] = std::move(next_state);
      for (std::size_t id = 0; id < dist.numel(); ++id) {
        if (!decode_allowed(static_cast<int>(id))) continue;
        cands.push_back({live[i].log_prob + step_log_prob(dist, static_cast<int>(id)),
                         static_cast<int>(id), i});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });

    std::vector<Hyp> next_live;
    std::size_t take = std::min(beam, cands.size());
    for (std::size_t k = 0; k < take; ++k) {
      const Candidate& c = cands[k];
      Hyp h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.score;
      h.state = next_states[c.parent];
      h.finished = c.token == kStop;
      if (h.finished) {
        finished.push_back(std::move(h));
      } else {
        next_live.push_back(std::move(h));
      }
    }
    live = std::move(next_live);
    if (finished.size() >= beam) break;
  }

  const std::vector<Hyp>& pool = finished.empty() ? live : finished;
  if (pool.empty()) return {};
  auto rank = [&](const Hyp& h) {
    return length_normalize && !h.tokens.empty()
               ? h.log_prob / static_cast<double>(h.tokens.size())
               : h.log_prob;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (rank(pool[i]) > rank(pool[best])) best = i;
  }

  DecodeResult result;
  result.log_prob = pool[best].log_prob;
  result.finished = pool[best].finished;
  result.tokens = pool[best].tokens;
  if (result.finished) result.tokens.pop_back();
  return result;
}

// Drives the real model incrementally over a shared tape.
class ModelPolicy {
 public:
  using State = DecoderState;

  ModelPolicy(Tape& tape, const ModelVars& vars, const ModelConfig& config,
              const EncodedExample& example)
      : tape_(tape),
        vars_(vars),
        config_(config),
        example_(example),
        enc_(encode_source(tape, vars, config, example.src_ids)) {}

  State start() { return initial_decoder_state(tape_, config_, enc_); }

  std::pair<State, Array> step(const State& state, int input_id) {
    StepOutput out =
        decoder_step(tape_, vars_, config_, enc_, state, input_id, example_.src_ext_ids);
    return {out.state, tape_.value(out.dist)};
  }

 private:
  Tape& tape_;
  const ModelVars& vars_;
  const ModelConfig& config_;
  const EncodedExample& example_;
  EncoderStates enc_;
};

inline std::vector<int> greedy_decode(const ParameterStore& params, const ModelConfig& config,
                                      const EncodedExample& example, std::size_t max_len = 0) {
  Tape tape;
  ModelVars vars = bind_params(tape, params);
  ModelPolicy policy(tape, vars, config, example);
  return greedy_decode_policy(policy, max_len ? max_len : config.max_len);
}

inline std::vector<int> sample_decode(const ParameterStore& params, const ModelConfig& config,
                                      const EncodedExample& example, Rng& rng,
                                      std::size_t max_len = 0) {
  Tape tape;
  ModelVars vars = bind_params(tape, params);
  ModelPolicy policy(tape, vars, config, example);
  return sample_decode_policy(policy, max_len ? max_len : config.max_len, rng);
}

inline DecodeResult beam_search_result(const ParameterStore& params, const ModelConfig& config,
                                       const EncodedExample& example, std::size_t beam = 8,
                                       std::size_t max_len = 0, bool length_normalize = false) {
  Tape tape;
  ModelVars vars = bind_params(tape, params);
  ModelPolicy policy(tape, vars, config, example);
  return beam_search_policy(policy, beam, max_len ? max_len : config.max_len, length_normalize);
}

inline std::vector<int> beam_search(const ParameterStore& params, const ModelConfig& config,
                                    const EncodedExample& example, std::size_t beam = 8,
                                    std::size_t max_len = 0, bool length_normalize = false) {
  return beam_search_result(params, config, example, beam, max_len, length_normalize).tokens;
}

}  // namespace pgen
