#include "clarigen/seq2seq/decoding.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "clarigen/corpus/vocab.h"
#include "clarigen/error.h"

namespace clarigen::seq2seq {

using corpus::kEos;
using corpus::kPad;
using corpus::kSos;

namespace {

Tensor take_rows(const Tensor& t, std::span<const std::size_t> parents) {
  numerics::Shape shape = t.shape();
  const std::size_t width = t.cols();
  shape[0] = parents.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < parents.size(); ++r) {
    std::copy_n(t.data() + parents[r] * width, width, out.data() + r * width);
  }
  return out;
}

bool is_identity(std::span<const std::size_t> parents, std::size_t rows) {
  if (parents.size() != rows) return false;
  for (std::size_t r = 0; r < rows; ++r) {
    if (parents[r] != r) return false;
  }
  return true;
}

}  // namespace

struct Seq2SeqScorer::Impl {
  Seq2Seq& model;
  Graph g{false};
  Rng unused{0};
  EncoderOutput enc;
  std::vector<LstmState> state;
  std::vector<LstmState> pending;
  std::vector<int> prev;
  std::vector<bool> allowed;
  bool scored = false;

  Impl(Seq2Seq& m, const Sequences& src) : model(m) {
    enc = encode(g, model, src, false, unused);
    state = enc.final;
    prev.assign(src.batch, kSos);
    allowed = emittable(model.config().vocab_size);
  }
};

Seq2SeqScorer::Seq2SeqScorer(const Seq2Seq& model, const Sequences& src)
    // inference graph: parameters are only read
    : impl_(std::make_unique<Impl>(const_cast<Seq2Seq&>(model), src)) {}

Seq2SeqScorer::~Seq2SeqScorer() = default;

std::size_t Seq2SeqScorer::rows() const { return impl_->prev.size(); }

Tensor Seq2SeqScorer::log_probs() {
  Impl& s = *impl_;
  s.pending = s.state;
  StepOutput out = decode_step(s.g, s.model, s.prev, s.pending, s.enc, false, s.unused);
  s.scored = true;
  return log_softmax_rows_restricted(out.logits, s.allowed).value();
}

void Seq2SeqScorer::advance(std::span<const std::size_t> parents, std::span<const int> tokens) {
  Impl& s = *impl_;
  if (!s.scored) throw ContractError("Seq2SeqScorer::advance called before log_probs");
  if (parents.size() != tokens.size()) throw DimensionError("advance: parents/tokens mismatch");
  s.scored = false;
  s.prev.assign(tokens.begin(), tokens.end());
  if (is_identity(parents, s.enc.batch)) {
    s.state = s.pending;
    return;
  }
  for (std::size_t l = 0; l < s.pending.size(); ++l) {
    s.state[l].h = s.g.input(take_rows(s.pending[l].h.value(), parents));
    s.state[l].c = s.g.input(take_rows(s.pending[l].c.value(), parents));
  }
  const std::size_t n = s.enc.length;
  std::vector<double> mask(parents.size() * n);
  for (std::size_t r = 0; r < parents.size(); ++r) {
    std::copy_n(s.enc.mask.begin() + static_cast<long>(parents[r] * n), n,
                mask.begin() + static_cast<long>(r * n));
  }
  s.enc.mask = std::move(mask);
  s.enc.batch = parents.size();
  if (s.enc.states) s.enc.states = s.g.input(take_rows(s.enc.states->value(), parents));
}

std::vector<Decoded> greedy_decode(StepScorer& scorer, std::size_t max_len) {
  const std::size_t rows = scorer.rows();
  std::vector<Decoded> out(rows);
  std::vector<bool> done(rows, false);
  std::vector<std::size_t> identity(rows);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  std::vector<int> tokens(rows, kPad);
  for (std::size_t t = 0; t < max_len; ++t) {
    const Tensor lp = scorer.log_probs();
    for (std::size_t r = 0; r < rows; ++r) {
      if (done[r]) {
        tokens[r] = kPad;
        continue;
      }
      std::size_t best = 0;
      for (std::size_t j = 1; j < lp.cols(); ++j) {
        if (lp.at(r, j) > lp.at(r, best)) best = j;
      }
      tokens[r] = static_cast<int>(best);
      out[r].ids.push_back(tokens[r]);
      out[r].step_log_probs.push_back(lp.at(r, best));
      out[r].log_prob += lp.at(r, best);
      if (tokens[r] == kEos) done[r] = true;
    }
    if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    if (t + 1 < max_len) scorer.advance(identity, tokens);
  }
  return out;
}

Decoded beam_search(StepScorer& scorer, std::size_t beam, std::size_t max_len) {
  if (beam == 0) throw ContractError("beam_search: beam must be at least 1");
  if (scorer.rows() != 1) throw ContractError("beam_search: scorer must start with one row");
  std::vector<Decoded> live(1);
  std::vector<Decoded> finished;
  struct Candidate {
    double score;
    double step;
    std::size_t row;
    int token;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.step != b.step) return a.step > b.step;
    if (a.row != b.row) return a.row < b.row;
    return a.token < b.token;
  };
  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    const Tensor lp = scorer.log_probs();
    std::vector<Candidate> cands;
    for (std::size_t r = 0; r < live.size(); ++r) {
      for (std::size_t j = 0; j < lp.cols(); ++j) {
        const double v = lp.at(r, j);
        if (!std::isfinite(v)) continue;
        cands.push_back({live[r].log_prob + v, v, r, static_cast<int>(j)});
      }
    }
    std::sort(cands.begin(), cands.end(), better);
    std::vector<Decoded> next;
    std::vector<std::size_t> parents;
    std::vector<int> tokens;
    // Finishing candidates ranked within the top `beam` are kept; the live
    // beam is refilled to `beam` hypotheses from the remaining candidates.
    for (std::size_t i = 0; i < cands.size() && next.size() < beam; ++i) {
      const Candidate& c = cands[i];
      const bool finishes = c.token == kEos || live[c.row].ids.size() + 1 == max_len;
      if (finishes && i >= beam) continue;
      Decoded h = live[c.row];
      h.ids.push_back(c.token);
      h.step_log_probs.push_back(c.step);
      h.log_prob = c.score;
      if (finishes) {
        finished.push_back(std::move(h));
      } else {
        parents.push_back(c.row);
        tokens.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (live.empty()) break;
    // Log-probabilities are nonpositive, so no live hypothesis can overtake a
    // finished one that already scores at least as high.
    double best_live = -std::numeric_limits<double>::infinity();
    for (const Decoded& h : live) best_live = std::max(best_live, h.log_prob);
    double best_done = -std::numeric_limits<double>::infinity();
    for (const Decoded& h : finished) best_done = std::max(best_done, h.log_prob);
    if (best_done >= best_live) break;
    scorer.advance(parents, tokens);
  }
  for (Decoded& h : live) finished.push_back(std::move(h));
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].log_prob > finished[best].log_prob) best = i;
  }
  return finished.empty() ? Decoded{} : finished[best];
}

std::vector<Decoded> sample_decode(StepScorer& scorer, numerics::Rng& rng, std::size_t max_len) {
  const std::size_t rows = scorer.rows();
  std::vector<Decoded> out(rows);
  std::vector<bool> done(rows, false);
  std::vector<std::size_t> identity(rows);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  std::vector<int> tokens(rows, kPad);
  std::vector<double> probs;
  for (std::size_t t = 0; t < max_len; ++t) {
    const Tensor lp = scorer.log_probs();
    probs.resize(lp.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      if (done[r]) {
        tokens[r] = kPad;
        continue;
      }
      for (std::size_t j = 0; j < lp.cols(); ++j) probs[j] = std::exp(lp.at(r, j));
      tokens[r] = static_cast<int>(rng.categorical(probs));
      const double v = lp.at(r, static_cast<std::size_t>(tokens[r]));
      out[r].ids.push_back(tokens[r]);
      out[r].step_log_probs.push_back(v);
      out[r].log_prob += v;
      if (tokens[r] == kEos) done[r] = true;
    }
    if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    if (t + 1 < max_len) scorer.advance(identity, tokens);
  }
  return out;
}

std::vector<Decoded> greedy_decode(const Seq2Seq& model, const Sequences& src,
                                   std::size_t max_len) {
  Seq2SeqScorer scorer(model, src);
  return greedy_decode(scorer, max_len);
}

Decoded greedy_decode(const Seq2Seq& model, const std::vector<int>& source, std::size_t max_len) {
  return greedy_decode(model, corpus::pad_sequences({source}), max_len)[0];
}

Decoded beam_search(const Seq2Seq& model, const std::vector<int>& source, std::size_t beam,
                    std::size_t max_len) {
  Seq2SeqScorer scorer(model, corpus::pad_sequences({source}));
  return beam_search(scorer, beam, max_len);
}

std::vector<Decoded> sample_decode(const Seq2Seq& model, const Sequences& src,
                                   numerics::Rng& rng, std::size_t max_len) {
  Seq2SeqScorer scorer(model, src);
  return sample_decode(scorer, rng, max_len);
}

}  // namespace clarigen::seq2seq
