#include "clarigen/retrieval/retrieval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "clarigen/error.h"

namespace clarigen::retrieval {
namespace {

SparseVector weigh(const std::map<std::size_t, std::size_t>& tf, const std::vector<double>& idf) {
  SparseVector v;
  double norm = 0.0;
  for (const auto& [term, count] : tf) {
    const double w = static_cast<double>(count) * idf[term];
    v.emplace_back(term, w);
    norm += w * w;
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& e : v) e.second /= norm;
  }
  return v;
}

}  // namespace

double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      s += a[i++].second * b[j++].second;
    }
  }
  return s;
}

TfIdfIndex::TfIdfIndex(const std::vector<corpus::Triple>& triples) {
  if (triples.empty()) throw ContractError("build_index: empty training set");
  std::map<Tokens, std::size_t> doc_of;
  for (const auto& t : triples) {
    auto [it, inserted] = doc_of.try_emplace(t.context, contexts_.size());
    if (inserted) {
      contexts_.push_back(t.context);
      questions_.emplace_back();
    }
    questions_[it->second].push_back(t.question);
  }

  std::map<std::string, std::size_t> df;
  for (const auto& c : contexts_) {
    std::vector<std::string> distinct(c.begin(), c.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (const auto& w : distinct) ++df[w];
  }
  const double n = static_cast<double>(contexts_.size());
  for (const auto& [term, count] : df) {
    term_ids_.emplace(term, terms_.size());
    terms_.push_back(term);
    idf_.push_back(std::log((n + 1.0) / (static_cast<double>(count) + 1.0)) + 1.0);
  }
  for (const auto& c : contexts_) vectors_.push_back(vectorize(c));
}

double TfIdfIndex::idf(const std::string& term) const {
  auto it = term_ids_.find(term);
  if (it == term_ids_.end()) throw ContractError("idf: term not indexed: " + term);
  return idf_[it->second];
}

SparseVector TfIdfIndex::vectorize(const Tokens& tokens) const {
  std::map<std::size_t, std::size_t> tf;
  for (const auto& w : tokens) {
    auto it = term_ids_.find(w);
    if (it != term_ids_.end()) ++tf[it->second];
  }
  return weigh(tf, idf_);
}

std::string TfIdfIndex::serialize() const {
  std::string out;
  char buf[64];
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    std::snprintf(buf, sizeof buf, " %.17g\n", idf_[t]);
    out += terms_[t] + buf;
  }
  for (std::size_t d = 0; d < contexts_.size(); ++d) {
    out += "doc " + std::to_string(d) + ": " + corpus::join(contexts_[d]) + "\n";
    for (const auto& [term, w] : vectors_[d]) {
      std::snprintf(buf, sizeof buf, " %zu:%.17g", term, w);
      out += buf;
    }
    out += "\n";
    for (const auto& q : questions_[d]) out += "  q: " + corpus::join(q) + "\n";
  }
  return out;
}

std::vector<Hit> top_k(const Tokens& context, const TfIdfIndex& index, std::size_t k) {
  const SparseVector query = index.vectorize(context);
  std::vector<Hit> hits(index.size());
  for (std::size_t d = 0; d < index.size(); ++d) hits[d] = {d, dot(query, index.vector(d))};
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(keep), hits.end(),
                    [](const Hit& a, const Hit& b) {
                      return a.similarity != b.similarity ? a.similarity > b.similarity
                                                          : a.id < b.id;
                    });
  hits.resize(keep);
  return hits;
}

std::vector<Tokens> candidate_questions(const Tokens& context, const TfIdfIndex& index,
                                        std::size_t k) {
  std::vector<Tokens> out;
  for (const Hit& h : top_k(context, index, k)) {
    const auto& qs = index.questions(h.id);
    out.insert(out.end(), qs.begin(), qs.end());
  }
  return out;
}

Tokens lucene_baseline(const Tokens& context, const TfIdfIndex& index, numerics::Rng& rng,
                       std::size_t k) {
  auto candidates = candidate_questions(context, index, k);
  if (candidates.empty()) throw ContractError("lucene_baseline: no candidate questions");
  return candidates[rng.index(candidates.size())];
}

}  // namespace clarigen::retrieval
