#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pgen/array.hpp"
#include "pgen/autodiff.hpp"
#include "pgen/corpus.hpp"
#include "pgen/error.hpp"
#include "pgen/rng.hpp"

namespace pgen {

// Pointer-generator encoder-decoder, single-layer throughout: bidirectional
// LSTM encoder, LSTM decoder with input feeding, additive attention, scalar
// copy gate mixing the generation softmax with the attention distribution
// over the extended (source OOV) vocabulary.

struct ModelConfig {
  std::size_t hidden_dim = 256;
  std::size_t emb_dim = 128;
  std::size_t vocab_size = 5000;
  std::size_t max_len = 20;

  void validate() const {
    if (hidden_dim == 0 || emb_dim == 0) throw ConfigError("model dims must be positive");
    if (vocab_size <= kNumSpecials) {
      throw ConfigError("vocab_size must exceed the " + std::to_string(kNumSpecials) +
                        " reserved ids");
    }
    if (max_len < 2) throw ConfigError("max_len must be at least 2");
  }
};

// Ordered name -> Array map. Iteration order is insertion order, which fixes
// the checkpoint layout and the gradient draw order.
class ParameterStore {
 public:
  void add(std::string name, Array value) {
    if (index_.count(name)) throw ContractError("duplicate parameter " + name);
    index_[name] = items_.size();
    items_.emplace_back(std::move(name), std::move(value));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Array& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter " + name);
    return items_[it->second].second;
  }
  const Array& at(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->at(name);
  }

  std::size_t size() const { return items_.size(); }
  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& [name, v] : items_) n += v.numel();
    return n;
  }

  const std::vector<std::pair<std::string, Array>>& items() const { return items_; }
  std::vector<std::pair<std::string, Array>>& items() { return items_; }

 private:
  std::vector<std::pair<std::string, Array>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Canonical parameter layout. Names ending in _b are biases and start at
// zero; everything else is a weight drawn uniformly from [-0.1, 0.1].
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(
    const ModelConfig& c) {
  std::size_t H = c.hidden_dim, E = c.emb_dim, V = c.vocab_size;
  return {
      {"embedding", {V, E}},
      {"enc_fwd_w", {4 * H, E + H}},
      {"enc_fwd_b", {4 * H}},
      {"enc_bwd_w", {4 * H, E + H}},
      {"enc_bwd_b", {4 * H}},
      {"reduce_h_w", {H, 2 * H}},
      {"reduce_h_b", {H}},
      {"reduce_c_w", {H, 2 * H}},
      {"reduce_c_b", {H}},
      {"dec_w", {4 * H, (E + 2 * H) + H}},
      {"dec_b", {4 * H}},
      {"attn_wh", {2 * H, H}},  // input-major: projects encoder rows
      {"attn_ws", {H, H}},
      {"attn_v", {H}},
      {"attn_b", {H}},
      {"out_w", {V, 3 * H}},
      {"out_b", {V}},
      {"gate_wc", {2 * H}},
      {"gate_ws", {H}},
      {"gate_wx", {E + 2 * H}},
      {"gate_b", {1}},
  };
}

inline bool is_bias_name(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, "_b") == 0;
}

inline ParameterStore init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParameterStore store;
  Rng rng(seed);
  for (auto& [name, shape] : param_shapes(config)) {
    Array value(shape);
    if (!is_bias_name(name)) {
      for (std::size_t i = 0; i < value.numel(); ++i) value[i] = rng.uniform(-0.1, 0.1);
    }
    store.add(name, std::move(value));
  }
  return store;
}

// Tape handles for every parameter, one leaf per store entry.
struct ModelVars {
  Var embedding;
  Var enc_fwd_w, enc_fwd_b, enc_bwd_w, enc_bwd_b;
  Var reduce_h_w, reduce_h_b, reduce_c_w, reduce_c_b;
  Var dec_w, dec_b;
  Var attn_wh, attn_ws, attn_v, attn_b;
  Var out_w, out_b;
  Var gate_wc, gate_ws, gate_wx, gate_b;
};

inline const std::vector<std::pair<const char*, Var ModelVars::*>>& model_var_members() {
  static const std::vector<std::pair<const char*, Var ModelVars::*>> members = {
      {"embedding", &ModelVars::embedding},
      {"enc_fwd_w", &ModelVars::enc_fwd_w},
      {"enc_fwd_b", &ModelVars::enc_fwd_b},
      {"enc_bwd_w", &ModelVars::enc_bwd_w},
      {"enc_bwd_b", &ModelVars::enc_bwd_b},
      {"reduce_h_w", &ModelVars::reduce_h_w},
      {"reduce_h_b", &ModelVars::reduce_h_b},
      {"reduce_c_w", &ModelVars::reduce_c_w},
      {"reduce_c_b", &ModelVars::reduce_c_b},
      {"dec_w", &ModelVars::dec_w},
      {"dec_b", &ModelVars::dec_b},
      {"attn_wh", &ModelVars::attn_wh},
      {"attn_ws", &ModelVars::attn_ws},
      {"attn_v", &ModelVars::attn_v},
      {"attn_b", &ModelVars::attn_b},
      {"out_w", &ModelVars::out_w},
      {"out_b", &ModelVars::out_b},
      {"gate_wc", &ModelVars::gate_wc},
      {"gate_ws", &ModelVars::gate_ws},
      {"gate_wx", &ModelVars::gate_wx},
      {"gate_b", &ModelVars::gate_b},
  };
  return members;
}

inline ModelVars bind_params(Tape& tape, const ParameterStore& store) {
  ModelVars vars;
  std::unordered_map<std::string, Var ModelVars::*> lut;
  for (auto& [name, member] : model_var_members()) lut[name] = member;
  for (const auto& [name, value] : store.items()) {
    auto it = lut.find(name);
    if (it == lut.end()) throw ContractError("bind_params: unknown parameter " + name);
    vars.*(it->second) = tape.leaf(value);
  }
  for (auto& [name, member] : model_var_members()) {
    if (!(vars.*member).valid()) throw ContractError(std::string("bind_params: missing ") + name);
  }
  return vars;
}

// Gradients in store order, read off the tape after backward().
inline GradMap collect_gradients(const Tape& tape, const ModelVars& vars,
                                 const ParameterStore& store) {
  std::unordered_map<std::string, Var ModelVars::*> lut;
  for (auto& [name, member] : model_var_members()) lut[name] = member;
  GradMap grads;
  grads.reserve(store.size());
  for (const auto& [name, value] : store.items()) {
    grads.emplace_back(name, tape.grad(vars.*lut.at(name)));
  }
  return grads;
}

struct EncoderStates {
  Var h_mat;       // (S, 2H) stacked per-position states
  Var attn_proj;   // (S, H) = h_mat * attn_wh, reused across decoder steps
  Var dec_h0;      // (H) initial decoder hidden
  Var dec_c0;      // (H) initial decoder cell
  std::size_t src_len = 0;
};

struct DecoderState {
  Var h;        // (H)
  Var c;        // (H)
  Var context;  // (2H) previous attention context, for input feeding
};

struct StepOutput {
  DecoderState state;
  Var dist;       // (vocab_size + n_oovs) probabilities
  Var attention;  // (S)
  Var p_gen;      // scalar
};

namespace detail {

// One LSTM cell step; w is (4H, in+H) packed [input, forget, cell, output].
inline std::pair<Var, Var> lstm_step(Tape& tape, Var w, Var b, Var x, Var h_prev, Var c_prev) {
  std::size_t H = tape.value(h_prev).numel();
  Var z = tape.add(tape.matmul(w, tape.concat(x, h_prev)), b);
  Var i = tape.sigmoid(tape.slice(z, 0, H));
  Var f = tape.sigmoid(tape.slice(z, H, H));
  Var g = tape.tanh(tape.slice(z, 2 * H, H));
  Var o = tape.sigmoid(tape.slice(z, 3 * H, H));
  Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

}  // namespace detail

inline EncoderStates encode_source(Tape& tape, const ModelVars& vars, const ModelConfig& config,
                                   const std::vector<int>& src_ids) {
  if (src_ids.empty()) throw ContractError("encode_source: empty source");
  for (int id : src_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw ContractError("encode_source: id " + std::to_string(id) +
                          " outside base vocabulary (extended ids never enter the encoder)");
    }
  }
  std::size_t S = src_ids.size(), H = config.hidden_dim;

  std::vector<Var> embs(S);
  for (std::size_t i = 0; i < S; ++i) {
    embs[i] = tape.lookup(vars.embedding, static_cast<std::size_t>(src_ids[i]));
  }

  std::vector<Var> fwd_h(S), bwd_h(S);
  Var h = tape.zeros(H), c = tape.zeros(H);
  for (std::size_t i = 0; i < S; ++i) {
    std::tie(h, c) = detail::lstm_step(tape, vars.enc_fwd_w, vars.enc_fwd_b, embs[i], h, c);
    fwd_h[i] = h;
  }
  Var fwd_h_last = h, fwd_c_last = c;

  h = tape.zeros(H);
  c = tape.zeros(H);
  for (std::size_t i = S; i-- > 0;) {
    std::tie(h, c) = detail::lstm_step(tape, vars.enc_bwd_w, vars.enc_bwd_b, embs[i], h, c);
    bwd_h[i] = h;
  }
  Var bwd_h_last = h, bwd_c_last = c;

  std::vector<Var> rows(S);
  for (std::size_t i = 0; i < S; ++i) rows[i] = tape.concat(fwd_h[i], bwd_h[i]);

  EncoderStates enc;
  enc.src_len = S;
  enc.h_mat = tape.stack_rows(rows);
  enc.attn_proj = tape.matmul(enc.h_mat, vars.attn_wh);
  enc.dec_h0 = tape.tanh(tape.add(
      tape.matmul(vars.reduce_h_w, tape.concat(fwd_h_last, bwd_h_last)), vars.reduce_h_b));
  enc.dec_c0 = tape.tanh(tape.add(
      tape.matmul(vars.reduce_c_w, tape.concat(fwd_c_last, bwd_c_last)), vars.reduce_c_b));
  return enc;
}

inline DecoderState initial_decoder_state(Tape& tape, const ModelConfig& config,
                                          const EncoderStates& enc) {
  return DecoderState{enc.dec_h0, enc.dec_c0, tape.zeros(2 * config.hidden_dim)};
}

inline StepOutput decoder_step(Tape& tape, const ModelVars& vars, const ModelConfig& config,
                               const EncoderStates& enc, const DecoderState& state, int input_id,
                               const std::vector<int>& src_ext_ids) {
  std::size_t V = config.vocab_size;
  std::size_t n_oovs = 0;
  for (int e : src_ext_ids) {
    if (e >= static_cast<int>(V)) {
      n_oovs = std::max(n_oovs, static_cast<std::size_t>(e) - V + 1);
    }
  }
  if (input_id < 0 || static_cast<std::size_t>(input_id) >= V + n_oovs) {
    throw ContractError("decoder_step: input id " + std::to_string(input_id) +
                        " outside extended vocabulary of size " + std::to_string(V + n_oovs));
  }
  if (src_ext_ids.size() != enc.src_len) {
    throw ContractError("decoder_step: src_ext_ids length does not match encoder states");
  }

  // Extended-id inputs embed as UNK.
  std::size_t emb_id =
      static_cast<std::size_t>(input_id) < V ? static_cast<std::size_t>(input_id) : kUnk;
  Var emb = tape.lookup(vars.embedding, emb_id);
  Var x = tape.concat(emb, state.context);

  auto [hvar, cvar] = detail::lstm_step(tape, vars.dec_w, vars.dec_b, x, state.h, state.c);

  Var q = tape.add(tape.matmul(vars.attn_ws, hvar), vars.attn_b);
  Var scores = tape.matmul(tape.tanh(tape.add_rowwise(enc.attn_proj, q)), vars.attn_v);
  Var attention = tape.softmax(scores);
  Var context = tape.weighted_sum_rows(enc.h_mat, attention);

  Var p_vocab = tape.softmax(
      tape.add(tape.matmul(vars.out_w, tape.concat(hvar, context)), vars.out_b));

  Var gate_pre = tape.add(
      tape.add(tape.dot(vars.gate_wc, context), tape.dot(vars.gate_ws, hvar)),
      tape.add(tape.dot(vars.gate_wx, x), tape.sum(vars.gate_b)));
  Var p_gen = tape.sigmoid(gate_pre);

  std::size_t ext_size = V + n_oovs;
  std::vector<int> vocab_targets(V);
  std::iota(vocab_targets.begin(), vocab_targets.end(), 0);
  Var gen_part = tape.scatter(tape.smul(p_gen, p_vocab), vocab_targets, ext_size);
  Var copy_part =
      tape.scatter(tape.smul(tape.scale_shift(p_gen, -1.0, 1.0), attention), src_ext_ids, ext_size);
  Var dist = tape.add(gen_part, copy_part);

  StepOutput out;
  out.state = DecoderState{hvar, cvar, context};
  out.dist = dist;
  out.attention = attention;
  out.p_gen = p_gen;
  return out;
}

inline constexpr double kLogFloor = 1e-12;

// log(dist[id] + eps); the floor keeps zero-mass sampled ids finite.
inline Var step_log_prob(Tape& tape, Var dist, int token_id) {
  const Array& d = tape.value(dist);
  if (token_id < 0 || static_cast<std::size_t>(token_id) >= d.numel()) {
    throw ContractError("step_log_prob: id " + std::to_string(token_id) +
                        " out of range for support " + std::to_string(d.numel()));
  }
  return tape.log(tape.scale_shift(tape.pick(dist, static_cast<std::size_t>(token_id)), 1.0,
                                   kLogFloor));
}

inline double step_log_prob(const Array& dist, int token_id) {
  if (token_id < 0 || static_cast<std::size_t>(token_id) >= dist.numel()) {
    throw ContractError("step_log_prob: id " + std::to_string(token_id) +
                        " out of range for support " + std::to_string(dist.numel()));
  }
  return std::log(dist[static_cast<std::size_t>(token_id)] + kLogFloor);
}

}  // namespace pgen
