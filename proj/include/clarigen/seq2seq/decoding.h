#pragma once

#include <memory>
#include <span>
#include <vector>

#include "clarigen/seq2seq/model.h"

namespace clarigen::seq2seq {

struct Decoded {
  std::vector<int> ids;  // ends with EOS unless max_len was reached
  double log_prob = 0.0;
  std::vector<double> step_log_probs;
};

// Incremental next-token scorer over a set of rows (hypotheses). Excluded
// tokens carry log-probability -inf.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t rows() const = 0;
  // rows() x V log-probabilities for the next token of each row.
  virtual Tensor log_probs() = 0;
  // New row r extends old row parents[r] with tokens[r]. Must follow log_probs().
  virtual void advance(std::span<const std::size_t> parents, std::span<const int> tokens) = 0;
};

// Scores with a Seq2Seq in inference mode; one row per source sequence.
class Seq2SeqScorer : public StepScorer {
 public:
  Seq2SeqScorer(const Seq2Seq& model, const Sequences& src);
  ~Seq2SeqScorer() override;

  std::size_t rows() const override;
  Tensor log_probs() override;
  void advance(std::span<const std::size_t> parents, std::span<const int> tokens) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Argmax per step, ties to the lowest id; stops at EOS or max_len.
std::vector<Decoded> greedy_decode(StepScorer& scorer, std::size_t max_len);
// Starts from a single row. Length-unnormalized. Hypotheses ending in EOS (or
// reaching max_len) leave the beam, which is refilled with the next-best live
// extensions, and compete in the final ranking. The search stops once no live
// hypothesis can beat the best finished one.
Decoded beam_search(StepScorer& scorer, std::size_t beam, std::size_t max_len);
// Ancestral sampling per row.
std::vector<Decoded> sample_decode(StepScorer& scorer, numerics::Rng& rng, std::size_t max_len);

std::vector<Decoded> greedy_decode(const Seq2Seq& model, const Sequences& src,
                                   std::size_t max_len = kMaxDecodeLen);
Decoded greedy_decode(const Seq2Seq& model, const std::vector<int>& source,
                      std::size_t max_len = kMaxDecodeLen);
Decoded beam_search(const Seq2Seq& model, const std::vector<int>& source, std::size_t beam = 5,
                    std::size_t max_len = kMaxDecodeLen);
std::vector<Decoded> sample_decode(const Seq2Seq& model, const Sequences& src,
                                   numerics::Rng& rng, std::size_t max_len = kMaxDecodeLen);

}  // namespace clarigen::seq2seq
