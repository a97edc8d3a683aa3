#pragma once

// Independent brute-force implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "clarigen/corpus/text.h"

namespace clarigen::testing {

using corpus::Tokens;

// Every window joined into a string key; distinct keys over windows.
inline double diversity_oracle(const std::vector<Tokens>& outputs, std::size_t n) {
  std::set<std::string> seen;
  double total = 0;
  for (const auto& o : outputs) {
    for (std::size_t i = 0; i + n <= o.size(); ++i) {
      std::string key;
      for (std::size_t k = 0; k < n; ++k) key += o[i + k] + '\x1f';
      seen.insert(key);
      total += 1;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(seen.size()) / total;
}

// Dense TF-IDF over string keys with cosine computed from its definition.
struct DenseTfIdfOracle {
  std::vector<Tokens> docs;
  std::map<std::string, double> idf;

  explicit DenseTfIdfOracle(const std::vector<corpus::Triple>& triples) {
    for (const auto& t : triples) {
      if (std::find(docs.begin(), docs.end(), t.context) == docs.end()) docs.push_back(t.context);
    }
    std::map<std::string, double> df;
    for (const auto& d : docs) {
      for (const auto& w : std::set<std::string>(d.begin(), d.end())) df[w] += 1;
    }
    const double n = static_cast<double>(docs.size());
    for (const auto& [w, f] : df) idf[w] = std::log((n + 1) / (f + 1)) + 1;
  }

  std::map<std::string, double> weights(const Tokens& t) const {
    std::map<std::string, double> v;
    for (const auto& w : t) {
      if (idf.count(w)) v[w] += idf.at(w);
    }
    return v;
  }

  double cosine(const Tokens& a, const Tokens& b) const {
    auto va = weights(a), vb = weights(b);
    double ab = 0, aa = 0, bb = 0;
    for (const auto& [w, x] : va) {
      aa += x * x;
      if (vb.count(w)) ab += x * vb[w];
    }
    for (const auto& [w, x] : vb) bb += x * x;
    return aa == 0 || bb == 0 ? 0.0 : ab / std::sqrt(aa * bb);
  }

  // (-similarity, id) ascending over all documents.
  std::vector<std::pair<double, std::size_t>> rank(const Tokens& q) const {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t d = 0; d < docs.size(); ++d) all.emplace_back(-cosine(q, docs[d]), d);
    std::sort(all.begin(), all.end());
    return all;
  }
};

}  // namespace clarigen::testing
