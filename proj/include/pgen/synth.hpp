#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgen/corpus.hpp"
#include "pgen/error.hpp"
#include "pgen/rng.hpp"

namespace pgen {

// Synthetic desk-scale corpora with a known learnable mapping.
//   substitution: source tokens come from the first half of the token set;
//                 the target maps each through a fixed bijection onto the
//                 second half (a deterministic paraphrase).
//   copy:         target = source, drawn from the full token set.
//   reverse:      target = source reversed.
// Lengths are uniform on [3, max_len]. Everything is a pure function of
// (task, vocab_size, n_pairs, max_len, seed).

enum class SynthTask { kSubstitution, kCopy, kReverse };

inline SynthTask parse_synth_task(const std::string& name) {
  if (name == "substitution") return SynthTask::kSubstitution;
  if (name == "copy") return SynthTask::kCopy;
  if (name == "reverse") return SynthTask::kReverse;
  throw ConfigError("unknown synthetic task " + name);
}

inline const char* synth_task_name(SynthTask task) {
  switch (task) {
    case SynthTask::kSubstitution: return "substitution";
    case SynthTask::kCopy: return "copy";
    case SynthTask::kReverse: return "reverse";
  }
  return "?";
}

inline void validate_synth_sizes(std::size_t vocab_size, std::size_t max_len) {
  if (vocab_size < 8) throw ConfigError("synth vocab_size must be at least 8");
  if (max_len < 3 || max_len > 20) throw ConfigError("synth max_len must lie in [3, 20]");
}

inline std::vector<std::string> synth_tokens(std::size_t vocab_size) {
  std::size_t width = 2;
  for (std::size_t v = 100; v < vocab_size; v *= 10) ++width;
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    std::string digits = std::to_string(i);
    tokens.push_back("tok" + std::string(width - digits.size(), '0') + digits);
  }
  return tokens;
}

// Bijection from the first half of the token set onto a seeded permutation
// of the second half.
inline std::unordered_map<std::string, std::string> substitution_table(std::size_t vocab_size,
                                                                       Rng& rng) {
  std::vector<std::string> tokens = synth_tokens(vocab_size);
  std::size_t half = vocab_size / 2;
  std::vector<std::string> image(tokens.begin() + static_cast<std::ptrdiff_t>(half),
                                 tokens.begin() + static_cast<std::ptrdiff_t>(2 * half));
  rng.shuffle(image);
  std::unordered_map<std::string, std::string> table;
  for (std::size_t i = 0; i < half; ++i) table[tokens[i]] = image[i];
  return table;
}

// Substitution corpus under an explicit table; sources draw from the first
// half of the token set and content depends only on content_rng.
inline std::vector<SentencePair> synth_substitution_with_table(
    std::size_t vocab_size, std::size_t n_pairs, std::size_t max_len, Rng& content_rng,
    const std::unordered_map<std::string, std::string>& table) {
  validate_synth_sizes(vocab_size, max_len);
  std::vector<std::string> tokens = synth_tokens(vocab_size);
  std::size_t half = vocab_size / 2;
  std::vector<SentencePair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    std::size_t len = 3 + content_rng.next_below(max_len - 2);
    SentencePair pair;
    for (std::size_t i = 0; i < len; ++i) {
      const std::string& tok = tokens[content_rng.next_below(half)];
      auto it = table.find(tok);
      if (it == table.end()) throw ContractError("substitution table misses token " + tok);
      pair.source.push_back(tok);
      pair.target.push_back(it->second);
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

inline std::vector<SentencePair> synth_corpus(SynthTask task, std::size_t vocab_size,
                                              std::size_t n_pairs, std::size_t max_len,
                                              std::uint64_t seed) {
  validate_synth_sizes(vocab_size, max_len);
  Rng root(seed);
  Rng table_rng = root.fork(1);
  Rng content_rng = root.fork(2);

  if (task == SynthTask::kSubstitution) {
    auto table = substitution_table(vocab_size, table_rng);
    return synth_substitution_with_table(vocab_size, n_pairs, max_len, content_rng, table);
  }

  std::vector<std::string> tokens = synth_tokens(vocab_size);
  std::vector<SentencePair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    std::size_t len = 3 + content_rng.next_below(max_len - 2);
    std::vector<std::string> seq(len);
    for (auto& tok : seq) tok = tokens[content_rng.next_below(vocab_size)];
    SentencePair pair;
    pair.source = seq;
    if (task == SynthTask::kReverse) std::reverse(seq.begin(), seq.end());
    pair.target = std::move(seq);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace pgen
