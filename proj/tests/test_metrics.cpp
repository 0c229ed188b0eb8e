#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "pgen/metrics.hpp"
#include "pgen/rng.hpp"

using namespace pgen;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> words) {
  return std::vector<std::string>(words.begin(), words.end());
}

// Independent oracle for clipped n-gram overlap: quadratic matching with
// used flags instead of count maps.
std::size_t naive_clipped(const std::vector<int>& cand, const std::vector<int>& ref,
                          std::size_t n) {
  if (cand.size() < n || ref.size() < n) return 0;
  std::vector<bool> used(ref.size() - n + 1, false);
  std::size_t matches = 0;
  for (std::size_t i = 0; i + n <= cand.size(); ++i) {
    for (std::size_t j = 0; j + n <= ref.size(); ++j) {
      if (used[j]) continue;
      bool equal = true;
      for (std::size_t k = 0; k < n; ++k) {
        if (cand[i + k] != ref[j + k]) { equal = false; break; }
      }
      if (equal) {
        used[j] = true;
        ++matches;
        break;
      }
    }
  }
  return matches;
}

RougeScore naive_rouge(const std::vector<int>& cand, const std::vector<int>& ref,
                       std::size_t n) {
  double total_c = cand.size() >= n ? double(cand.size() - n + 1) : 0.0;
  double total_r = ref.size() >= n ? double(ref.size() - n + 1) : 0.0;
  double m = double(naive_clipped(cand, ref, n));
  RougeScore s;
  s.precision = total_c > 0 ? m / total_c : 0.0;
  s.recall = total_r > 0 ? m / total_r : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall)
                                    : 0.0;
  return s;
}

double naive_bleu2(const std::vector<std::vector<int>>& cands,
                   const std::vector<std::vector<int>>& refs) {
  double m1 = 0, t1 = 0, m2 = 0, t2 = 0, clen = 0, rlen = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    m1 += double(naive_clipped(cands[i], refs[i], 1));
    t1 += double(cands[i].size());
    m2 += double(naive_clipped(cands[i], refs[i], 2));
    t2 += cands[i].size() >= 2 ? double(cands[i].size() - 1) : 0.0;
    clen += double(cands[i].size());
    rlen += double(refs[i].size());
  }
  if (t1 == 0 || t2 == 0 || m1 == 0 || m2 == 0) return 0.0;
  double bp = clen < rlen ? std::exp(1.0 - rlen / clen) : 1.0;
  return bp * std::sqrt((m1 / t1) * (m2 / t2));
}

}  // namespace

TEST_CASE("identical sequences score perfect rouge", "[metrics]") {
  auto s = toks({"the", "cat", "sat"});
  for (std::size_t n : {std::size_t(1), std::size_t(2)}) {
    RougeScore r = rouge_n(s, s, n);
    REQUIRE(r.precision == 1.0);
    REQUIRE(r.recall == 1.0);
    REQUIRE(r.f1 == 1.0);
  }
}

TEST_CASE("disjoint sequences score zero rouge", "[metrics]") {
  RougeScore r = rouge_n(toks({"a", "b"}), toks({"c", "d"}), 1);
  REQUIRE(r.precision == 0.0);
  REQUIRE(r.recall == 0.0);
  REQUIRE(r.f1 == 0.0);
}

TEST_CASE("rouge-2 of a b c against a b d is one half", "[metrics]") {
  RougeScore r = rouge_n(toks({"a", "b", "c"}), toks({"a", "b", "d"}), 2);
  REQUIRE(r.precision == 0.5);
  REQUIRE(r.recall == 0.5);
  REQUIRE(r.f1 == 0.5);
}

TEST_CASE("rouge handles sequences shorter than n", "[metrics]") {
  RougeScore r = rouge_n(toks({"a"}), toks({"a", "b"}), 2);
  REQUIRE(r.precision == 0.0);
  REQUIRE(r.recall == 0.0);
  REQUIRE(r.f1 == 0.0);
  RougeScore e = rouge_n(std::vector<std::string>{}, toks({"a"}), 1);
  REQUIRE(e.f1 == 0.0);
}

TEST_CASE("rouge f1 is symmetric in its arguments", "[metrics]") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<int> a, b;
    for (std::size_t i = 0, n = 1 + rng.next_below(8); i < n; ++i)
      a.push_back(int(rng.next_below(10)));
    for (std::size_t i = 0, n = 1 + rng.next_below(8); i < n; ++i)
      b.push_back(int(rng.next_below(10)));
    for (std::size_t n : {std::size_t(1), std::size_t(2)}) {
      REQUIRE(rouge_n(a, b, n).f1 == Catch::Approx(rouge_n(b, a, n).f1).margin(1e-12));
    }
  }
}

TEST_CASE("reward primitive is rouge-2 f1", "[metrics]") {
  REQUIRE(reward_rouge2(toks({"x", "y", "z"}), toks({"x", "y", "z"})) == 1.0);
  REQUIRE(reward_rouge2(std::vector<std::string>{}, toks({"x", "y"})) == 0.0);
  REQUIRE(reward_rouge2(toks({"a", "b", "c"}), toks({"a", "b", "d"})) == 0.5);
}

TEST_CASE("bleu2 is one for identical corpora", "[metrics]") {
  std::vector<std::vector<std::string>> c = {toks({"a", "b", "c"}), toks({"d", "e"})};
  REQUIRE(bleu2(c, c) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("brevity penalty at half length with perfect precision", "[metrics]") {
  // Candidate matches the first half of the reference exactly, so both
  // precisions are 1 and only the brevity penalty exp(1 - 4/2) remains.
  std::vector<std::vector<std::string>> cand = {toks({"a", "b"})};
  std::vector<std::vector<std::string>> ref = {toks({"a", "b", "c", "d"})};
  REQUIRE(bleu2(cand, ref) == Catch::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("bleu2 is zero when any precision is zero", "[metrics]") {
  // Unigrams overlap but no bigram does.
  std::vector<std::vector<std::string>> cand = {toks({"a", "x", "b"})};
  std::vector<std::vector<std::string>> ref = {toks({"a", "y", "b"})};
  REQUIRE(bleu2(cand, ref) == 0.0);
}

TEST_CASE("bleu2 rejects misaligned corpora", "[metrics]") {
  std::vector<std::vector<std::string>> cand = {toks({"a"})};
  std::vector<std::vector<std::string>> ref;
  REQUIRE_THROWS_AS(bleu2(cand, ref), ContractError);
}

TEST_CASE("evaluate_corpus scores identical corpora at 100", "[metrics]") {
  std::vector<std::vector<std::string>> c = {toks({"a", "b", "c"}), toks({"p", "q", "r"})};
  MetricReport rep = evaluate_corpus(c, c);
  REQUIRE(rep.rouge1 == Catch::Approx(100.0).margin(1e-9));
  REQUIRE(rep.rouge2 == Catch::Approx(100.0).margin(1e-9));
  REQUIRE(rep.bleu2 == Catch::Approx(100.0).margin(1e-9));
  REQUIRE(rep.avg == Catch::Approx(100.0).margin(1e-9));
}

TEST_CASE("evaluate_corpus single pair hand values", "[metrics]") {
  std::vector<std::vector<std::string>> cand = {toks({"a", "b", "c"})};
  std::vector<std::vector<std::string>> ref = {toks({"a", "b", "d"})};
  MetricReport rep = evaluate_corpus(cand, ref);
  // Unigram overlap 2 of 3 on both sides.
  REQUIRE(rep.rouge1 == Catch::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));
  REQUIRE(rep.rouge2 == Catch::Approx(50.0).epsilon(1e-9));
  // p1 = 2/3, p2 = 1/2, equal lengths so no brevity penalty.
  double expected_bleu = 100.0 * std::sqrt((2.0 / 3.0) * 0.5);
  REQUIRE(rep.bleu2 == Catch::Approx(expected_bleu).epsilon(1e-9));
  REQUIRE(rep.avg ==
          Catch::Approx((rep.rouge1 + rep.rouge2 + rep.bleu2) / 3.0).margin(1e-12));
}

TEST_CASE("evaluate_corpus rejects empty or misaligned corpora", "[metrics]") {
  std::vector<std::vector<std::string>> empty;
  REQUIRE_THROWS_AS(evaluate_corpus(empty, empty), ContractError);
  std::vector<std::vector<std::string>> one = {toks({"a"})};
  std::vector<std::vector<std::string>> two = {toks({"a"}), toks({"b"})};
  REQUIRE_THROWS_AS(evaluate_corpus(one, two), ContractError);
}

TEST_CASE("sentence-smoothed bleu is positive without bigram overlap", "[metrics]") {
  double s = bleu2_sentence_smoothed(toks({"a", "x", "b"}), toks({"a", "y", "b"}));
  REQUIRE(s > 0.0);
  REQUIRE(s < 1.0);
  REQUIRE(bleu2_sentence_smoothed(std::vector<std::string>{}, toks({"a"})) == 0.0);
}

TEST_CASE("random corpora agree with a brute-force oracle", "[metrics]") {
  Rng rng(101);
  for (int corpus = 0; corpus < 50; ++corpus) {
    std::size_t pairs = 1 + rng.next_below(6);
    std::vector<std::vector<int>> cands(pairs), refs(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
      std::size_t cl = 1 + rng.next_below(8), rl = 1 + rng.next_below(8);
      for (std::size_t i = 0; i < cl; ++i) cands[p].push_back(int(rng.next_below(10)));
      for (std::size_t i = 0; i < rl; ++i) refs[p].push_back(int(rng.next_below(10)));
    }
    for (std::size_t p = 0; p < pairs; ++p) {
      for (std::size_t n : {std::size_t(1), std::size_t(2), std::size_t(3)}) {
        RougeScore got = rouge_n(cands[p], refs[p], n);
        RougeScore want = naive_rouge(cands[p], refs[p], n);
        REQUIRE(got.precision == Catch::Approx(want.precision).margin(1e-9));
        REQUIRE(got.recall == Catch::Approx(want.recall).margin(1e-9));
        REQUIRE(got.f1 == Catch::Approx(want.f1).margin(1e-9));
      }
    }
    REQUIRE(bleu2(cands, refs) == Catch::Approx(naive_bleu2(cands, refs)).margin(1e-9));
  }
}
