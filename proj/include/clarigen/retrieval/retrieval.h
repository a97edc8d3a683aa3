#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "clarigen/corpus/text.h"
#include "clarigen/numerics/rng.h"

namespace clarigen::retrieval {

using corpus::Tokens;

// Sorted (term id, weight) pairs.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

double dot(const SparseVector& a, const SparseVector& b);

// TF-IDF index over distinct training contexts. Weights are tf * idf with
// idf = ln((N + 1) / (df + 1)) + 1, then L2-normalised. Documents keep the
// order in which their context first appears; that order is the context id.
class TfIdfIndex {
 public:
  explicit TfIdfIndex(const std::vector<corpus::Triple>& triples);

  std::size_t size() const { return contexts_.size(); }
  std::size_t term_count() const { return terms_.size(); }
  const Tokens& context(std::size_t id) const { return contexts_.at(id); }
  const std::vector<Tokens>& questions(std::size_t id) const { return questions_.at(id); }
  const SparseVector& vector(std::size_t id) const { return vectors_.at(id); }
  double idf(const std::string& term) const;

  // Terms unseen at build time are ignored; an all-unseen query is the zero vector.
  SparseVector vectorize(const Tokens& tokens) const;

  // Stable textual dump, used to check build determinism.
  std::string serialize() const;

 private:
  std::vector<std::string> terms_;
  std::map<std::string, std::size_t> term_ids_;
  std::vector<double> idf_;
  std::vector<Tokens> contexts_;
  std::vector<SparseVector> vectors_;
  std::vector<std::vector<Tokens>> questions_;
};

struct Hit {
  std::size_t id = 0;
  double similarity = 0.0;
};

// Highest cosine similarity first, ties by ascending id.
std::vector<Hit> top_k(const Tokens& context, const TfIdfIndex& index, std::size_t k = 10);

// Every question attached to the top-k contexts, in rank order.
std::vector<Tokens> candidate_questions(const Tokens& context, const TfIdfIndex& index,
                                        std::size_t k = 10);

// Uniform pick from candidate_questions.
Tokens lucene_baseline(const Tokens& context, const TfIdfIndex& index, numerics::Rng& rng,
                       std::size_t k = 10);

}  // namespace clarigen::retrieval
