#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pgen/array.hpp"
#include "pgen/autodiff.hpp"
#include "pgen/error.hpp"
#include "pgen/model.hpp"

namespace pgen {

struct OptimizerSpec {
  enum class Kind { kAdagrad, kAdam };
  Kind kind = Kind::kAdagrad;
  double learning_rate = 0.15;
  double adagrad_init_acc = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  static OptimizerSpec adagrad(double lr = 0.15, double init_acc = 0.1) {
    OptimizerSpec s;
    s.kind = Kind::kAdagrad;
    s.learning_rate = lr;
    s.adagrad_init_acc = init_acc;
    return s;
  }

  static OptimizerSpec adam(double lr = 1e-5) {
    OptimizerSpec s;
    s.kind = Kind::kAdam;
    s.learning_rate = lr;
    return s;
  }

  // learning_rate 0 is admitted so a no-op optimizer stays expressible.
  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("optimizer learning_rate must be non-negative");
    if (kind == Kind::kAdagrad && !(adagrad_init_acc >= 0.0)) {
      throw ConfigError("adagrad_init_acc must be non-negative");
    }
    if (kind == Kind::kAdam &&
        (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
         !(adam_eps > 0.0))) {
      throw ConfigError("adam moment/eps settings out of range");
    }
  }
};

// Per-parameter slots are created lazily on first touch. The adam step
// counter is shared across parameters, incremented once per optimizer_step.
struct OptimizerState {
  std::unordered_map<std::string, Array> acc;  // adagrad
  std::unordered_map<std::string, Array> m, v; // adam
  std::size_t t = 0;
};

// Applies one update in place. Gradients are expected pre-clipped. Every
// new value is staged and checked finite before any parameter or state slot
// is committed, so a numeric failure leaves both untouched.
inline void optimizer_step(ParameterStore& params, const GradMap& grads,
                           const OptimizerSpec& spec, OptimizerState& state) {
  spec.validate();
  struct Staged {
    std::string name;
    Array value;
    Array slot0;  // adagrad acc / adam m
    Array slot1;  // adam v
  };
  std::vector<Staged> staged;
  staged.reserve(grads.size());

  std::size_t next_t = state.t + 1;
  for (const auto& [name, g] : grads) {
    Array& theta = params.at(name);
    if (!theta.same_shape(g)) {
      throw ContractError("optimizer_step: gradient shape mismatch for " + name);
    }
    Staged s;
    s.name = name;
    s.value = theta;
    if (spec.kind == OptimizerSpec::Kind::kAdagrad) {
      auto it = state.acc.find(name);
      s.slot0 = it != state.acc.end() ? it->second : Array(g.shape(), spec.adagrad_init_acc);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if (g[i] == 0.0) continue;
        s.slot0[i] += g[i] * g[i];
        s.value[i] -= spec.learning_rate * g[i] / std::sqrt(s.slot0[i]);
      }
    } else {
      auto mit = state.m.find(name);
      auto vit = state.v.find(name);
      s.slot0 = mit != state.m.end() ? mit->second : Array(g.shape());
      s.slot1 = vit != state.v.end() ? vit->second : Array(g.shape());
      double bc1 = 1.0 - std::pow(spec.adam_beta1, static_cast<double>(next_t));
      double bc2 = 1.0 - std::pow(spec.adam_beta2, static_cast<double>(next_t));
      for (std::size_t i = 0; i < g.numel(); ++i) {
        s.slot0[i] = spec.adam_beta1 * s.slot0[i] + (1.0 - spec.adam_beta1) * g[i];
        s.slot1[i] = spec.adam_beta2 * s.slot1[i] + (1.0 - spec.adam_beta2) * g[i] * g[i];
        double m_hat = s.slot0[i] / bc1;
        double v_hat = s.slot1[i] / bc2;
        s.value[i] -= spec.learning_rate * m_hat / (std::sqrt(v_hat) + spec.adam_eps);
      }
    }
    if (!s.value.all_finite()) {
      throw NumericError("optimizer_step: non-finite update for " + name + "; step aborted");
    }
    staged.push_back(std::move(s));
  }

  for (auto& s : staged) {
    params.at(s.name) = std::move(s.value);
    if (spec.kind == OptimizerSpec::Kind::kAdagrad) {
      state.acc[s.name] = std::move(s.slot0);
    } else {
      state.m[s.name] = std::move(s.slot0);
      state.v[s.name] = std::move(s.slot1);
    }
  }
  if (spec.kind == OptimizerSpec::Kind::kAdam) state.t = next_t;
}

}  // namespace pgen
