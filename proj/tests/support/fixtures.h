#pragma once

// Constructions shared by the unit tests and the acceptance runner.

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "clarigen/corpus/batch.h"
#include "clarigen/mixer/mixer.h"
#include "clarigen/numerics/graph.h"
#include "gradcheck.h"
#include "models.h"

namespace clarigen::testing {

inline numerics::Tensor random_tensor(numerics::Rng& rng, numerics::Shape shape) {
  numerics::Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// One small loss per differentiable op (or op family) over shared parameters.
class OpGradCases {
 public:
  OpGradCases() : drop_seed_(99) {
    numerics::Rng rng(13);
    a_ = ps_.add("a", random_tensor(rng, {3, 4}));
    b_ = ps_.add("b", random_tensor(rng, {3, 4}));
    s_ = ps_.add("s", random_tensor(rng, {1}));
    k_ = ps_.add("keys", random_tensor(rng, {3, 5, 4}));
    e_ = ps_.add("emb", random_tensor(rng, {6, 4}));
  }
  OpGradCases(const OpGradCases&) = delete;
  OpGradCases& operator=(const OpGradCases&) = delete;

  numerics::ParameterSet& params() { return ps_; }

  std::vector<std::pair<std::string, LossBuilder>> cases() {
    using namespace numerics;
    auto P = [this](Graph& g, ParamId id) { return g.param(ps_[id]); };
    return {
        {"add/sub/mul/scale",
         [this, P](Graph& g) {
           auto a = P(g, a_), b = P(g, b_);
           return sum(mul(sub(add(a, scale(b, 0.7)), b), a));
         }},
        {"scalar broadcast",
         [this, P](Graph& g) {
           auto a = P(g, a_), s = P(g, s_);
           return sum(tanh(add(mul(a, s), s)));
         }},
        {"sigmoid", [this, P](Graph& g) { return sum(mul(sigmoid(P(g, a_)), P(g, b_))); }},
        {"softmax", [this, P](Graph& g) { return sum(mul(softmax_rows(P(g, a_)), P(g, b_))); }},
        {"log_softmax", [this, P](Graph& g) { return sum(mul(log_softmax_rows(P(g, a_)), P(g, b_))); }},
        {"restricted log_softmax",
         [this, P](Graph& g) { return sum(pick(log_softmax_rows_restricted(P(g, a_), allowed_), picks_)); }},
        {"concat/slice",
         [this, P](Graph& g) {
           Expr parts[] = {P(g, a_), tanh(P(g, b_))};
           auto c = concat_cols(parts);
           return sum(mul(slice_cols(c, 2, 6), slice_cols(c, 4, 8)));
         }},
        {"gather", [this, P](Graph& g) { return sum(mul(gather_rows(P(g, e_), ids_), P(g, a_))); }},
        {"select_rows",
         [this, P](Graph& g) {
           auto a = P(g, a_), b = P(g, b_);
           return sum(mul(select_rows(sel_, tanh(a), b), a));
         }},
        {"attention",
         [this, P](Graph& g) {
           auto keys = P(g, k_);
           auto w = masked_softmax_rows(batched_dot(P(g, a_), keys), att_mask_);
           return sum(mul(batched_weighted_sum(w, keys), P(g, b_)));
         }},
        {"stack",
         [this, P](Graph& g) {
           Expr steps[] = {P(g, a_), tanh(P(g, b_)), P(g, a_)};
           return sum(batched_dot(P(g, b_), stack_steps(steps)));
         }},
        {"bce", [this, P](Graph& g) { return bce_with_logits(slice_cols(P(g, a_), 1, 2), labels_); }},
        {"cross_entropy",
         [this, P](Graph& g) { return cross_entropy(P(g, a_), picks_, ce_mask_); }},
        {"weighted_sum", [this, P](Graph& g) { return weighted_sum(pick(tanh(P(g, a_)), picks_), weights_); }},
        {"dropout (fixed mask)",
         [this, P](Graph& g) {
           Rng r = drop_seed_;
           return sum(mul(dropout(P(g, a_), 0.5, true, r), P(g, b_)));
         }},
    };
  }

 private:
  numerics::ParameterSet ps_;
  numerics::ParamId a_, b_, s_, k_, e_;
  std::vector<bool> sel_{true, false, true};
  std::vector<bool> allowed_{true, false, true, true};
  std::vector<double> att_mask_{1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  std::vector<int> ids_{5, 0, 5};
  std::vector<int> picks_{3, 0, 2};
  std::vector<double> ce_mask_{1, 0, 1};
  std::vector<double> labels_{1, 0, 1};
  std::vector<double> weights_{0.5, -1.5, 2.0};
  numerics::Rng drop_seed_;
};

// Beam counterexample over ids 0 PAD, 1 UNK (unused), 2 SOS, 3 EOS, 4 "a",
// 5 "b": greedy takes "a" first, but [b, EOS] is the most probable sequence.
inline std::vector<double> beam_toy_distribution(const std::vector<int>& prefix) {
  std::vector<double> p(6, 0.0);
  if (prefix.empty()) {
    p[4] = 0.6;
    p[5] = 0.4;
  } else if (prefix.size() == 1 && prefix[0] == 4) {
    p[4] = 0.34;
    p[5] = 0.33;
    p[3] = 0.33;
  } else if (prefix.size() == 1 && prefix[0] == 5) {
    p[3] = 0.9;
    p[4] = 0.05;
    p[5] = 0.05;
  } else {
    p[4] = 0.5;
    p[5] = 0.3;
    p[3] = 0.2;
  }
  return p;
}

// Exhaustive search over every sequence that ends in EOS or reaches max_len.
inline void enumerate_best(std::vector<int>& prefix, double logp, std::size_t max_len,
                           std::vector<int>& best, double& best_lp) {
  const auto p = beam_toy_distribution(prefix);
  for (int tok = 0; tok < 6; ++tok) {
    if (p[tok] <= 0) continue;
    prefix.push_back(tok);
    const double lp = logp + std::log(p[tok]);
    if (tok == corpus::kEos || prefix.size() == max_len) {
      if (lp > best_lp) {
        best_lp = lp;
        best = prefix;
      }
    } else {
      enumerate_best(prefix, lp, max_len, best, best_lp);
    }
    prefix.pop_back();
  }
}

inline std::vector<corpus::EncodedTriple> toy_triples(std::size_t n, std::size_t vocab,
                                                      std::uint64_t seed) {
  numerics::Rng rng(seed);
  std::vector<corpus::EncodedTriple> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto q = random_ids(rng, rng.index(5), vocab);
    q.push_back(corpus::kEos);
    auto a = random_ids(rng, 1 + rng.index(3), vocab);
    a.push_back(corpus::kEos);
    out.push_back({random_ids(rng, 2 + rng.index(5), vocab), q, a});
  }
  return out;
}

inline corpus::Batch whole(const std::vector<corpus::EncodedTriple>& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return corpus::make_batch(data, idx);
}

struct ReinforceToyResult {
  double relative_error = 0.0;
  double exact_norm = 0.0;
  std::size_t samples = 0;
};

// T = 1 policy over the three emittable tokens of a five-token vocabulary
// (UNK, EOS and one word) with fixed rewards. The Monte-Carlo estimate is the
// negated mixer_loss gradient at delta 0 averaged over rounds x rows samples;
// the exact gradient is the central difference of the enumerated E[r].
inline ReinforceToyResult reinforce_toy(std::size_t rounds = 100, std::size_t rows = 1000) {
  using namespace numerics;
  const std::size_t vocab = corpus::kNumSpecials + 1;
  const int word = corpus::kNumSpecials;
  auto gen = tiny_seq2seq(vocab, 25, 4, 3, 1);
  scale_params(gen.params(), 6.0);
  const std::vector<int> outcomes{corpus::kUnk, corpus::kEos, word};
  auto token_reward = [](int t) { return t == corpus::kUnk ? 0.2 : t == corpus::kEos ? 0.9 : 0.5; };
  mixer::RewardFn reward = [&](const std::vector<std::vector<int>>&,
                               const std::vector<std::vector<int>>& q) {
    std::vector<double> out;
    for (const auto& s : q) out.push_back(token_reward(s.at(0)));
    return out;
  };
  const std::vector<int> context{word, word, corpus::kUnk};

  auto expected_reward = [&](Graph& g) {
    Rng unused(0);
    auto enc = seq2seq::encode(g, gen, corpus::pad_sequences({context}), false, unused);
    auto state = enc.final;
    const std::vector<int> sos{corpus::kSos};
    auto step = seq2seq::decode_step(g, gen, sos, state, enc, false, unused);
    const Tensor& lp = log_softmax_rows_restricted(step.logits, seq2seq::emittable(vocab)).value();
    double e = 0.0;
    for (int t : outcomes) e += std::exp(lp.at(0, t)) * token_reward(t);
    return g.input(Tensor::scalar(e));
  };
  std::vector<double> exact;
  for (auto& p : gen.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + 1e-5;
      const double up = eval_loss(expected_reward);
      p.value[i] = orig - 1e-5;
      const double down = eval_loss(expected_reward);
      p.value[i] = orig;
      exact.push_back((up - down) / 2e-5);
    }
  }

  const corpus::Batch batch = whole(std::vector<corpus::EncodedTriple>(
      rows, corpus::EncodedTriple{context, {corpus::kEos}, {corpus::kEos}}));
  std::vector<double> estimate(exact.size(), 0.0);
  Rng d(1), s(2);
  for (std::size_t r = 0; r < rounds; ++r) {
    gen.params().zero_grad();
    Graph g;
    mixer::MixerLoss ml = mixer::mixer_loss(g, gen, batch, 0, reward, d, s, 1);
    g.backward(ml.loss);
    std::size_t k = 0;
    for (const auto& p : gen.params()) {
      for (double v : p.grad.values()) estimate[k++] -= v / static_cast<double>(rows * rounds);
    }
  }
  gen.params().zero_grad();
  double diff = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    diff += (estimate[k] - exact[k]) * (estimate[k] - exact[k]);
    norm += exact[k] * exact[k];
  }
  return {std::sqrt(diff / norm), std::sqrt(norm), rows * rounds};
}

}  // namespace clarigen::testing
