#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "pgen/error.hpp"

namespace pgen {

// Schedule-rate function family: iteration -> rate in [0, 1].
//   constant:    k
//   exp_decay:   max(k^i, floor)              with 0 < k < 1
//   inv_sigmoid: max(k / (k + exp(i/k)), floor)  with k > 1
struct ScheduleSpec {
  enum class Kind { kConstant, kExpDecay, kInvSigmoid };
  Kind kind = Kind::kConstant;
  double k = 1.0;
  double floor = 0.0;

  static ScheduleSpec constant(double k) { return make(Kind::kConstant, k, 0.0); }
  static ScheduleSpec exp_decay(double k, double floor = 0.0) {
    return make(Kind::kExpDecay, k, floor);
  }
  static ScheduleSpec inv_sigmoid(double k, double floor = 0.0) {
    return make(Kind::kInvSigmoid, k, floor);
  }

  static ScheduleSpec make(Kind kind, double k, double floor) {
    ScheduleSpec s{kind, k, floor};
    s.validate();
    return s;
  }

  void validate() const {
    if (floor < 0.0 || floor > 1.0) {
      throw ConfigError("schedule: floor must lie in [0,1]");
    }
    switch (kind) {
      case Kind::kConstant:
        if (k < 0.0 || k > 1.0) throw ConfigError("schedule: constant rate must lie in [0,1]");
        break;
      case Kind::kExpDecay:
        if (!(k > 0.0 && k < 1.0)) {
          throw ConfigError("schedule: exp decay requires 0 < k < 1");
        }
        break;
      case Kind::kInvSigmoid:
        if (!(k > 1.0)) throw ConfigError("schedule: inverse sigmoid requires k > 1");
        break;
    }
  }

  std::string str() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::kConstant: os << "const:" << k; break;
      case Kind::kExpDecay: os << "exp:" << k; break;
      case Kind::kInvSigmoid: os << "sig:" << k; break;
    }
    if (floor != 0.0) os << ":" << floor;
    return os.str();
  }
};

inline double rate(const ScheduleSpec& spec, std::uint64_t iteration) {
  spec.validate();
  switch (spec.kind) {
    case ScheduleSpec::Kind::kConstant:
      return spec.k;
    case ScheduleSpec::Kind::kExpDecay: {
      // k^i = exp(i ln k); underflows to 0 for large i, never overflows.
      double r = std::exp(static_cast<double>(iteration) * std::log(spec.k));
      return std::max(r, spec.floor);
    }
    case ScheduleSpec::Kind::kInvSigmoid: {
      // k/(k+exp(i/k)) rewritten with exp(-i/k) so large i cannot overflow.
      double e = std::exp(-static_cast<double>(iteration) / spec.k);
      double r = spec.k * e / (spec.k * e + 1.0);
      return std::max(r, spec.floor);
    }
  }
  throw ConfigError("schedule: unknown kind");
}

// Config syntax: `const:0.5`, `exp:0.9999[:floor]`, `sig:3000[:floor]`.
inline ScheduleSpec parse_schedule(const std::string& text) {
  auto c1 = text.find(':');
  if (c1 == std::string::npos) {
    throw ConfigError("schedule spec '" + text + "': expected kind:value");
  }
  std::string kind = text.substr(0, c1);
  std::string rest = text.substr(c1 + 1);
  double k = 0.0, floor = 0.0;
  auto c2 = rest.find(':');
  auto parse_number = [&text](const std::string& field) {
    try {
      std::size_t used = 0;
      double v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument("trailing junk");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("schedule spec '" + text + "': bad number");
    }
  };
  if (c2 == std::string::npos) {
    k = parse_number(rest);
  } else {
    k = parse_number(rest.substr(0, c2));
    floor = parse_number(rest.substr(c2 + 1));
  }
  if (kind == "const") return ScheduleSpec::make(ScheduleSpec::Kind::kConstant, k, floor);
  if (kind == "exp") return ScheduleSpec::make(ScheduleSpec::Kind::kExpDecay, k, floor);
  if (kind == "sig") return ScheduleSpec::make(ScheduleSpec::Kind::kInvSigmoid, k, floor);
  throw ConfigError("schedule spec '" + text + "': unknown kind '" + kind + "'");
}

}  // namespace pgen
