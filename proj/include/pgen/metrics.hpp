#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "pgen/error.hpp"

namespace pgen {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

namespace detail {

template <typename Sym>
std::map<std::vector<Sym>, std::size_t> ngram_counts(const std::vector<Sym>& toks,
                                                     std::size_t n) {
  std::map<std::vector<Sym>, std::size_t> counts;
  if (toks.size() >= n) {
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      counts[std::vector<Sym>(toks.begin() + i, toks.begin() + i + n)]++;
    }
  }
  return counts;
}

// Clipped overlap: sum over n-grams of min(count_cand, count_ref).
template <typename Sym>
std::size_t clipped_matches(const std::map<std::vector<Sym>, std::size_t>& cand,
                            const std::map<std::vector<Sym>, std::size_t>& ref) {
  std::size_t matches = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(c, it->second);
  }
  return matches;
}

}  // namespace detail

// ROUGE-N with clipped counts; precision, recall, and F1 are 0 by convention
// when their denominator is 0.
template <typename Sym>
RougeScore rouge_n(const std::vector<Sym>& candidate, const std::vector<Sym>& reference,
                   std::size_t n) {
  if (n < 1) throw ContractError("rouge_n: n must be at least 1");
  auto cand = detail::ngram_counts(candidate, n);
  auto ref = detail::ngram_counts(reference, n);
  std::size_t total_cand = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  std::size_t total_ref = reference.size() >= n ? reference.size() - n + 1 : 0;
  std::size_t matches = detail::clipped_matches(cand, ref);
  RougeScore s;
  s.precision = total_cand ? static_cast<double>(matches) / total_cand : 0.0;
  s.recall = total_ref ? static_cast<double>(matches) / total_ref : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

// ROUGE-2 F1, the learner's reward primitive.
template <typename Sym>
double reward_rouge2(const std::vector<Sym>& candidate, const std::vector<Sym>& reference) {
  return rouge_n(candidate, reference, 2).f1;
}

// Corpus-level BLEU up to bigrams: uniform (1/2, 1/2) weights over clipped
// modified precisions, brevity penalty exp(1 - r/c) when c < r. Returns 0 if
// either corpus-level precision is 0.
template <typename Sym>
double bleu2(const std::vector<std::vector<Sym>>& candidates,
             const std::vector<std::vector<Sym>>& references) {
  if (candidates.size() != references.size()) {
    throw ContractError("bleu2: candidate/reference count mismatch");
  }
  std::size_t match1 = 0, total1 = 0, match2 = 0, total2 = 0;
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& r = references[i];
    cand_len += c.size();
    ref_len += r.size();
    match1 += detail::clipped_matches(detail::ngram_counts(c, 1), detail::ngram_counts(r, 1));
    total1 += c.size();
    match2 += detail::clipped_matches(detail::ngram_counts(c, 2), detail::ngram_counts(r, 2));
    total2 += c.size() >= 2 ? c.size() - 1 : 0;
  }
  if (total1 == 0 || total2 == 0 || match1 == 0 || match2 == 0) return 0.0;
  double p1 = static_cast<double>(match1) / total1;
  double p2 = static_cast<double>(match2) / total2;
  double bp = cand_len < ref_len
                  ? std::exp(1.0 - static_cast<double>(ref_len) / cand_len)
                  : 1.0;
  return bp * std::exp(0.5 * std::log(p1) + 0.5 * std::log(p2));
}

// Sentence-level BLEU-2 with add-one smoothing on the precisions. Diagnostic
// only; corpus scores always come from bleu2.
template <typename Sym>
double bleu2_sentence_smoothed(const std::vector<Sym>& candidate,
                               const std::vector<Sym>& reference) {
  std::size_t m1 = detail::clipped_matches(detail::ngram_counts(candidate, 1),
                                           detail::ngram_counts(reference, 1));
  std::size_t t1 = candidate.size();
  std::size_t m2 = detail::clipped_matches(detail::ngram_counts(candidate, 2),
                                           detail::ngram_counts(reference, 2));
  std::size_t t2 = candidate.size() >= 2 ? candidate.size() - 1 : 0;
  if (t1 == 0) return 0.0;
  double p1 = (m1 + 1.0) / (t1 + 1.0);
  double p2 = (m2 + 1.0) / (t2 + 1.0);
  double bp = candidate.size() < reference.size()
                  ? std::exp(1.0 - static_cast<double>(reference.size()) / candidate.size())
                  : 1.0;
  return bp * std::exp(0.5 * std::log(p1) + 0.5 * std::log(p2));
}

// Scores on the conventional x100 scale.
struct MetricReport {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double bleu2 = 0.0;
  double avg = 0.0;
};

template <typename Sym>
MetricReport evaluate_corpus(const std::vector<std::vector<Sym>>& candidates,
                             const std::vector<std::vector<Sym>>& references) {
  if (candidates.empty() || candidates.size() != references.size()) {
    throw ContractError("evaluate_corpus: corpora must be non-empty and aligned");
  }
  double r1 = 0.0, r2 = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    r1 += rouge_n(candidates[i], references[i], 1).f1;
    r2 += rouge_n(candidates[i], references[i], 2).f1;
  }
  MetricReport rep;
  rep.rouge1 = 100.0 * r1 / candidates.size();
  rep.rouge2 = 100.0 * r2 / candidates.size();
  rep.bleu2 = 100.0 * bleu2(candidates, references);
  rep.avg = (rep.rouge1 + rep.rouge2 + rep.bleu2) / 3.0;
  return rep;
}

}  // namespace pgen
