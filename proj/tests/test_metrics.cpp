#include <cmath>
#include <set>
#include <sstream>

#include "clarigen/error.h"
#include "clarigen/metrics/metrics.h"
#include "clarigen/numerics/rng.h"
#include "doctest.h"
#include "support/oracles.h"

using namespace clarigen::metrics;
using clarigen::numerics::Rng;
using clarigen::testing::diversity_oracle;

namespace {

Tokens toks(const std::string& s) {
  std::istringstream in(s);
  Tokens out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::vector<Tokens> random_corpus(Rng& rng, std::size_t outputs, std::size_t vocab) {
  std::vector<Tokens> corpus;
  for (std::size_t i = 0; i < outputs; ++i) {
    Tokens t;
    const std::size_t len = rng.index(9);
    for (std::size_t k = 0; k < len; ++k) t.push_back("w" + std::to_string(rng.index(vocab)));
    corpus.push_back(t);
  }
  return corpus;
}

}  // namespace

TEST_CASE("diversity: worked cases, edge cases and duplicates") {
  CHECK(diversity({toks("a b c d")}) == 1.0);
  CHECK(diversity({toks("a b c"), toks("a b c")}) == 0.5);
  CHECK(diversity({toks("a b"), toks("")}) == 0.0);
  CHECK(diversity({}) == 0.0);
  CHECK_THROWS_AS(diversity({toks("a")}, 0), clarigen::ContractError);
  const std::vector<Tokens> base{toks("a b c d"), toks("b c d e f")};
  auto dup = base;
  dup.push_back(base[1]);
  CHECK(diversity(dup) <= diversity(base));
}

TEST_CASE("diversity equals the brute-force set computation on 50 random corpora") {
  Rng rng(1);
  for (int c = 0; c < 50; ++c) {
    const auto corpus = random_corpus(rng, 50, 4 + c % 5);
    for (std::size_t n : {1u, 2u, 3u}) {
      const double d = diversity(corpus, n);
      CHECK(d == diversity_oracle(corpus, n));
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
  }
}

TEST_CASE("bleu: identical is 100, disjoint is 0") {
  CHECK(bleu({{toks("a b c d e"), {toks("a b c d e")}}}) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(bleu({{toks("x y z w"), {toks("a b c d e")}}}) == 0.0);
  CHECK_THROWS_AS(bleu({}), clarigen::ContractError);
}

TEST_CASE("bleu: hand-worked clipping case") {
  // Instance 1: hyp "the the the cat", ref "the cat sat".
  //   unigrams: "the" clipped to 1, "cat" 1 -> 2/4
  //   bigrams:  "the the" x2 (0), "the cat" (1) -> 1/3
  //   trigrams: 0/2; 4-grams: 0/1
  // Instance 2 is a perfect 5-token match: 5/5, 4/4, 3/3, 2/2.
  // Pooled: 7/9, 5/7, 3/5, 2/3; c = 9 > r = 8 so no brevity penalty.
  const std::vector<EvalInstance> corpus{{toks("the the the cat"), {toks("the cat sat")}},
                                         {toks("a b c d e"), {toks("a b c d e")}}};
  const auto s = bleu_stats(corpus);
  CHECK(s.matches == std::vector<std::size_t>{7, 5, 3, 2});
  CHECK(s.totals == std::vector<std::size_t>{9, 7, 5, 3});
  const double expected = 100.0 * std::pow(7.0 / 9 * 5.0 / 7 * 3.0 / 5 * 2.0 / 3, 0.25);
  CHECK(std::abs(bleu(corpus) - expected) < 5e-5);
  CHECK(std::abs(bleu(corpus) - 68.6589) < 5e-5);
  // Alone, instance 1 has no matching trigram, so BLEU is 0 without smoothing.
  CHECK(bleu({corpus[0]}) == 0.0);
}

TEST_CASE("bleu: hand-worked multi-reference case, clip by max over references") {
  // hyp "a cat is on the mat"; refs "the cat is on the mat", "there is a cat on the mat".
  //   unigrams 6/6 ("a" only in ref 2, "the" clipped at 1)
  //   bigrams  5/5 ("a cat" from ref 2, the rest from ref 1)
  //   trigrams 3/4 ("a cat is" absent)
  //   4-grams  2/3 ("cat is on the", "is on the mat")
  // closest reference length 6 = c, no penalty.
  const std::vector<EvalInstance> corpus{
      {toks("a cat is on the mat"), {toks("the cat is on the mat"), toks("there is a cat on the mat")}}};
  const double expected = 100.0 * std::pow(1.0 * 1.0 * 0.75 * (2.0 / 3.0), 0.25);
  CHECK(std::abs(bleu(corpus) - expected) < 5e-5);
  CHECK(std::abs(bleu(corpus) - 84.0896) < 5e-5);
}

TEST_CASE("bleu: hand-worked brevity penalty with the closest reference") {
  // c = 4; reference lengths 6 and 5, closest is 5; all precisions are 1.
  const std::vector<EvalInstance> shortened{
      {toks("the cat sat on"), {toks("the cat sat on the mat"), toks("a cat sat on it")}}};
  CHECK(std::abs(bleu(shortened) - 100.0 * std::exp(1.0 - 5.0 / 4.0)) < 5e-5);
  CHECK(std::abs(bleu(shortened) - 77.8801) < 5e-5);
  // Lengths 5 and 3 are equally close to 4; the shorter wins, so no penalty.
  const std::vector<EvalInstance> tie{
      {toks("the cat sat on"), {toks("the cat sat on the"), toks("cat sat on")}}};
  CHECK(bleu_stats(tie).reference_length == 3);
  CHECK(std::abs(bleu(tie) - 100.0) < 1e-9);
}

TEST_CASE("bleu: order invariant; 100 whenever every hypothesis is one of its references") {
  Rng rng(2);
  std::vector<EvalInstance> corpus;
  for (int i = 0; i < 30; ++i) {
    auto refs = random_corpus(rng, 1 + rng.index(3), 6);
    for (auto& r : refs) {
      while (r.size() < 4) r.push_back("pad" + std::to_string(rng.index(3)));
    }
    corpus.push_back({refs[rng.index(refs.size())], refs});
  }
  CHECK(std::abs(bleu(corpus) - 100.0) < 1e-9);
  auto noisy = corpus;
  for (auto& inst : noisy) inst.hypothesis.back() = "zz";
  auto reversed = noisy;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(bleu(noisy) == bleu(reversed));
}

TEST_CASE("stemmer rules") {
  CHECK(stem("cats") == "cat");
  CHECK(stem("boxes") == "box");
  CHECK(stem("wishes") == "wish");
  CHECK(stem("running") == "run");
  CHECK(stem("stopped") == "stop");
  CHECK(stem("jumped") == "jump");
  CHECK(stem("glass") == "glass");
  CHECK(stem("is") == "is");
  CHECK(stem("falling") == "fall");
}

TEST_CASE("meteor_lite: worked values") {
  CHECK(meteor_lite({toks("cat"), {toks("cat")}}) == doctest::Approx(0.5));
  CHECK(meteor_lite({toks("dog"), {toks("cat")}}) == 0.0);
  CHECK(meteor_lite({toks("cats"), {toks("cat")}}) == doctest::Approx(0.5));
  // Three matches in one chunk: penalty 0.5 * (1/3)^3.
  CHECK(meteor_lite({toks("the cat sat"), {toks("the cat sat")}}) ==
        doctest::Approx(1.0 - 0.5 / 27.0));
  // "sat | the cat" against "the cat sat": two chunks.
  CHECK(meteor_lite({toks("sat the cat"), {toks("the cat sat")}}) ==
        doctest::Approx(1.0 - 0.5 * 8.0 / 27.0));
  // Two of three hypothesis tokens match a 4-token reference in one chunk.
  // P = 2/3, R = 1/2, Fmean = PR / (0.9 P + 0.1 R), penalty 0.5 * (1/2)^3.
  const double p = 2.0 / 3.0, r = 0.5;
  CHECK(meteor_lite({toks("the cat ran"), {toks("the cat sat down")}}) ==
        doctest::Approx(p * r / (0.9 * p + 0.1 * r) * (1.0 - 0.5 / 8.0)));
  // Best reference wins.
  CHECK(meteor_lite({toks("cat"), {toks("dog"), toks("cat")}}) == doctest::Approx(0.5));
}

TEST_CASE("meteor_lite: bounded by one and zero only without matches") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto c = random_corpus(rng, 3, 5);
    if (c[0].empty() || c[1].empty()) continue;
    const double m = meteor_lite({c[0], {c[1], c[2]}});
    CHECK(m <= 1.0);
    CHECK(m >= 0.0);
    bool any = false;
    for (const auto& h : c[0]) {
      for (std::size_t k = 1; k < 3; ++k) {
        for (const auto& w : c[k]) any = any || stem(h) == stem(w);
      }
    }
    CHECK((m == 0.0) == !any);
  }
}

TEST_CASE("evaluate_systems: rows match the individual metrics; deterministic bytes") {
  const std::vector<std::vector<Tokens>> refs{{toks("what color is it ?"), toks("which color ?")},
                                              {toks("how big is the lamp ?")}};
  const std::vector<Tokens> first{refs[0][0], refs[1][0]};
  const std::vector<Tokens> other{toks("what size is it ?"), toks("is the lamp big ?")};
  const auto report = evaluate_systems({{"reference", first}, {"other", other}}, refs);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].bleu == doctest::Approx(100.0));
  CHECK(report.rows[0].diversity == diversity(first));
  CHECK(report.rows[1].diversity == diversity(other));
  CHECK(report.rows[1].bleu == bleu({{other[0], refs[0]}, {other[1], refs[1]}}));
  CHECK(report.rows[1].meteor ==
        doctest::Approx(50.0 * (meteor_lite({other[0], refs[0]}) + meteor_lite({other[1], refs[1]}))));
  const auto again = evaluate_systems({{"reference", first}, {"other", other}}, refs);
  CHECK(report.text() == again.text());
  CHECK(report.json() == again.json());
  CHECK_THROWS_AS(evaluate_systems({{"short", {first[0]}}}, refs), clarigen::ContractError);
}
