#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgen/error.hpp"
#include "pgen/rng.hpp"

namespace pgen {

// Reserved token ids, in this order, in every vocabulary.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kStart = 2;
inline constexpr int kStop = 3;
inline constexpr std::size_t kNumSpecials = 4;

inline const char* special_token(int id) {
  switch (id) {
    case kPad: return "<pad>";
    case kUnk: return "<unk>";
    case kStart: return "<start>";
    case kStop: return "<stop>";
  }
  return nullptr;
}

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) out.push_back(std::move(tok)), tok.clear();
    } else {
      tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!tok.empty()) out.push_back(std::move(tok));
  return out;
}

// Fixed token table with the four specials at ids 0..3. Immutable once built.
class Vocabulary {
 public:
  Vocabulary() {
    for (int i = 0; i < static_cast<int>(kNumSpecials); ++i) add(special_token(i));
  }

  std::size_t size() const { return tokens_.size(); }

  // UNK for tokens outside the table.
  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::string& token_of(std::size_t id) const {
    if (id >= tokens_.size()) {
      throw ContractError("token_of: id " + std::to_string(id) + " out of range");
    }
    return tokens_[id];
  }

  void add(const std::string& token) {
    if (index_.emplace(token, static_cast<int>(tokens_.size())).second) {
      tokens_.push_back(token);
    }
  }

  void dump(std::ostream& os) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) os << tokens_[i] << '\t' << i << '\n';
  }

  void dump_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write vocabulary file: " + path);
    dump(os);
  }

  static Vocabulary load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": missing tab");
      }
      std::string token = line.substr(0, tab);
      int id = 0;
      try {
        std::size_t used = 0;
        id = std::stoi(line.substr(tab + 1), &used);
        if (used != line.size() - tab - 1) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": bad id");
      }
      if (id < static_cast<int>(kNumSpecials)) {
        if (token != special_token(id)) {
          throw ParseError("vocabulary line " + std::to_string(lineno) +
                           ": special id mismatch");
        }
        continue;
      }
      if (id != static_cast<int>(v.size())) {
        throw ParseError("vocabulary line " + std::to_string(lineno) + ": ids not contiguous");
      }
      v.add(token);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Token-id view of one pair, with per-example extended ids so the copy
// mechanism can address source OOV words. A source OOV gets id
// vocab.size() + (its first-occurrence index in src_oovs).
struct EncodedExample {
  std::vector<int> src_ids;      // UNK substituted for OOV
  std::vector<int> src_ext_ids;  // extended ids for OOV
  std::vector<std::string> src_oovs;
  std::vector<int> tgt_ids;      // ends with STOP
  std::vector<int> tgt_ext_ids;  // ends with STOP
};

// Reads `source<TAB>target` lines. Pairs where either side tokenizes to
// nothing are dropped; *dropped reports how many.
inline std::vector<SentencePair> load_pairs(const std::string& path,
                                            std::optional<std::size_t> limit = std::nullopt,
                                            std::size_t* dropped = nullptr) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open corpus file: " + path);
  std::vector<SentencePair> pairs;
  std::string line;
  std::size_t lineno = 0, drop_count = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (limit && pairs.size() >= *limit) break;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first_tab = line.find('\t');
    if (first_tab == std::string::npos || line.find('\t', first_tab + 1) != std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected exactly one tab in " +
                       path);
    }
    SentencePair p;
    p.source = tokenize(line.substr(0, first_tab));
    p.target = tokenize(line.substr(first_tab + 1));
    if (p.source.empty() || p.target.empty()) {
      ++drop_count;
      continue;
    }
    pairs.push_back(std::move(p));
  }
  if (dropped) *dropped = drop_count;
  return pairs;
}

// Specials plus the (cap - 4) most frequent tokens over sources and targets
// combined. Frequency ties are broken by first occurrence.
inline Vocabulary build_vocab(const std::vector<SentencePair>& pairs, std::size_t cap = 5000) {
  if (cap < kNumSpecials + 1) {
    throw ConfigError("build_vocab: cap must be at least " + std::to_string(kNumSpecials + 1));
  }
  if (pairs.empty()) throw ConfigError("build_vocab: no pairs");
  struct Entry {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  std::size_t tick = 0;
  auto count_tokens = [&](const std::vector<std::string>& toks) {
    for (const auto& t : toks) {
      auto [it, fresh] = freq.try_emplace(t);
      if (fresh) it->second.first_seen = tick++;
      ++it->second.count;
    }
  };
  for (const auto& p : pairs) {
    count_tokens(p.source);
    count_tokens(p.target);
  }
  std::vector<std::pair<std::string, Entry>> order(freq.begin(), freq.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  Vocabulary v;
  for (const auto& [token, entry] : order) {
    if (v.size() >= cap) break;
    v.add(token);
  }
  return v;
}

// Truncates both sides to max_len (the target keeps room for STOP) and
// assigns extended ids to source OOVs in first-occurrence order.
inline EncodedExample encode(const SentencePair& pair, const Vocabulary& vocab,
                             std::size_t max_len = 20) {
  if (max_len < 1) throw ConfigError("encode: max_len must be at least 1");
  EncodedExample ex;
  std::size_t src_n = std::min(pair.source.size(), max_len);
  int base = static_cast<int>(vocab.size());
  std::unordered_map<std::string, int> oov_ids;
  for (std::size_t i = 0; i < src_n; ++i) {
    const std::string& tok = pair.source[i];
    int id = vocab.id_of(tok);
    ex.src_ids.push_back(id);
    if (id == kUnk && !vocab.contains(tok)) {
      auto [it, fresh] = oov_ids.try_emplace(tok, base + static_cast<int>(ex.src_oovs.size()));
      if (fresh) ex.src_oovs.push_back(tok);
      ex.src_ext_ids.push_back(it->second);
    } else {
      ex.src_ext_ids.push_back(id);
    }
  }
  std::size_t tgt_n = std::min(pair.target.size(), max_len - 1);
  for (std::size_t i = 0; i < tgt_n; ++i) {
    const std::string& tok = pair.target[i];
    int id = vocab.id_of(tok);
    ex.tgt_ids.push_back(id);
    if (id == kUnk && !vocab.contains(tok)) {
      auto it = oov_ids.find(tok);
      ex.tgt_ext_ids.push_back(it == oov_ids.end() ? kUnk : it->second);
    } else {
      ex.tgt_ext_ids.push_back(id);
    }
  }
  ex.tgt_ids.push_back(kStop);
  ex.tgt_ext_ids.push_back(kStop);
  return ex;
}

// Maps ids back to tokens, stopping at (and excluding) the first STOP.
// Extended ids index into src_oovs.
inline std::vector<std::string> decode_tokens(const std::vector<int>& ids,
                                              const Vocabulary& vocab,
                                              const std::vector<std::string>& src_oovs) {
  std::vector<std::string> out;
  int base = static_cast<int>(vocab.size());
  for (int id : ids) {
    if (id == kStop) break;
    if (id < 0 || id >= base + static_cast<int>(src_oovs.size())) {
      throw DecodeError("decode_tokens: id " + std::to_string(id) + " out of range (vocab " +
                        std::to_string(base) + " + " + std::to_string(src_oovs.size()) +
                        " OOVs)");
    }
    out.push_back(id < base ? vocab.token_of(static_cast<std::size_t>(id))
                            : src_oovs[static_cast<std::size_t>(id - base)]);
  }
  return out;
}

inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

struct CorpusSplit {
  std::vector<SentencePair> train, val, test;
};

// Deterministic shuffle under seed, then contiguous slices.
inline CorpusSplit split(const std::vector<SentencePair>& pairs, std::size_t train_n,
                         std::size_t val_n, std::size_t test_n, std::uint64_t seed) {
  if (train_n + val_n + test_n > pairs.size()) {
    throw ConfigError("split: requested " + std::to_string(train_n + val_n + test_n) +
                      " pairs but only " + std::to_string(pairs.size()) + " available");
  }
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  CorpusSplit out;
  std::size_t pos = 0;
  auto take = [&](std::vector<SentencePair>& dst, std::size_t n) {
    dst.reserve(n);
    for (std::size_t i = 0; i < n; ++i) dst.push_back(pairs[order[pos++]]);
  };
  take(out.train, train_n);
  take(out.val, val_n);
  take(out.test, test_n);
  return out;
}

inline void write_pairs(const std::string& path, const std::vector<SentencePair>& pairs) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write corpus file: " + path);
  for (const auto& p : pairs) os << detokenize(p.source) << '\t' << detokenize(p.target) << '\n';
}

}  // namespace pgen
