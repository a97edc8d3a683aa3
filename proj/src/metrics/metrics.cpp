#include "clarigen/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "clarigen/error.h"
#include "json.hpp"

namespace clarigen::metrics {
namespace {

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<NGram, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[NGram(tokens.begin() + static_cast<long>(i), tokens.begin() + static_cast<long>(i + n))];
  }
  return counts;
}

bool ends_with(const std::string& w, const std::string& suffix) {
  return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string undouble(std::string w) {
  const std::size_t n = w.size();
  if (n >= 2 && w[n - 1] == w[n - 2] && !is_vowel(w[n - 1]) && w[n - 1] != 'l' &&
      w[n - 1] != 's' && w[n - 1] != 'z') {
    w.pop_back();
  }
  return w;
}

}  // namespace

double diversity(const std::vector<Tokens>& outputs, std::size_t n) {
  if (n == 0) throw ContractError("diversity: n must be at least 1");
  std::set<NGram> distinct;
  std::size_t total = 0;
  for (const auto& out : outputs) {
    for (const auto& [gram, count] : ngram_counts(out, n)) {
      distinct.insert(gram);
      total += count;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
}

BleuStats bleu_stats(const std::vector<EvalInstance>& instances, std::size_t max_n) {
  if (max_n == 0) throw ContractError("bleu: max_n must be at least 1");
  BleuStats s;
  s.matches.assign(max_n, 0);
  s.totals.assign(max_n, 0);
  for (const auto& inst : instances) {
    if (inst.references.empty()) throw ContractError("bleu: instance without references");
    const std::size_t c = inst.hypothesis.size();
    s.hypothesis_length += c;
    std::size_t best = inst.references.front().size();
    for (const auto& ref : inst.references) {
      const std::size_t d = ref.size() > c ? ref.size() - c : c - ref.size();
      const std::size_t bd = best > c ? best - c : c - best;
      if (d < bd || (d == bd && ref.size() < best)) best = ref.size();
    }
    s.reference_length += best;
    for (std::size_t n = 1; n <= max_n; ++n) {
      std::map<NGram, std::size_t> max_ref;
      for (const auto& ref : inst.references) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          max_ref[gram] = std::max(max_ref[gram], count);
        }
      }
      for (const auto& [gram, count] : ngram_counts(inst.hypothesis, n)) {
        s.totals[n - 1] += count;
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) s.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  return s;
}

double bleu(const std::vector<EvalInstance>& instances, std::size_t max_n) {
  if (instances.empty()) throw ContractError("bleu: empty corpus");
  const BleuStats s = bleu_stats(instances, max_n);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (s.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double c = static_cast<double>(s.hypothesis_length);
  const double r = static_cast<double>(s.reference_length);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

std::string stem(const std::string& word) {
  if (ends_with(word, "ing") && word.size() > 5) return undouble(word.substr(0, word.size() - 3));
  if (ends_with(word, "ed") && word.size() > 4) return undouble(word.substr(0, word.size() - 2));
  if (ends_with(word, "es") && word.size() > 4) {
    const std::string base = word.substr(0, word.size() - 2);
    if (ends_with(base, "s") || ends_with(base, "x") || ends_with(base, "z") ||
        ends_with(base, "ch") || ends_with(base, "sh")) {
      return base;
    }
  }
  if (ends_with(word, "s") && !ends_with(word, "ss") && word.size() > 3) {
    return word.substr(0, word.size() - 1);
  }
  return word;
}

namespace {

// Two-stage unigram alignment. Within a stage each hypothesis token, left to
// right, takes the unmatched reference position that extends the previous
// token's match when possible, else the leftmost candidate.
std::vector<long> align(const Tokens& hyp, const Tokens& ref) {
  std::vector<long> to_ref(hyp.size(), -1);
  std::vector<bool> used(ref.size(), false);
  std::vector<std::string> hyp_stem, ref_stem;
  for (const auto& w : hyp) hyp_stem.push_back(stem(w));
  for (const auto& w : ref) ref_stem.push_back(stem(w));
  for (int stage = 0; stage < 2; ++stage) {
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      if (to_ref[i] >= 0) continue;
      auto same = [&](std::size_t j) {
        return stage == 0 ? hyp[i] == ref[j] : hyp_stem[i] == ref_stem[j];
      };
      long pick = -1;
      if (i > 0 && to_ref[i - 1] >= 0) {
        const std::size_t next = static_cast<std::size_t>(to_ref[i - 1]) + 1;
        if (next < ref.size() && !used[next] && same(next)) pick = static_cast<long>(next);
      }
      for (std::size_t j = 0; pick < 0 && j < ref.size(); ++j) {
        if (!used[j] && same(j)) pick = static_cast<long>(j);
      }
      if (pick >= 0) {
        to_ref[i] = pick;
        used[static_cast<std::size_t>(pick)] = true;
      }
    }
  }
  return to_ref;
}

double meteor_single(const Tokens& hyp, const Tokens& ref, const MeteorParams& p) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto to_ref = align(hyp, ref);
  std::size_t matches = 0, chunks = 0;
  long prev = -2;
  for (long j : to_ref) {
    if (j < 0) {
      prev = -2;
      continue;
    }
    ++matches;
    if (j != prev + 1) ++chunks;
    prev = j;
  }
  if (matches == 0) return 0.0;
  const double m = static_cast<double>(matches);
  const double precision = m / static_cast<double>(hyp.size());
  const double recall = m / static_cast<double>(ref.size());
  const double fmean = precision * recall / (p.alpha * precision + (1.0 - p.alpha) * recall);
  const double penalty = p.gamma * std::pow(static_cast<double>(chunks) / m, p.beta);
  return fmean * (1.0 - penalty);
}

}  // namespace

double meteor_lite(const EvalInstance& instance, const MeteorParams& params) {
  double best = 0.0;
  for (const auto& ref : instance.references) {
    best = std::max(best, meteor_single(instance.hypothesis, ref, params));
  }
  return best;
}

EvaluationReport evaluate_systems(
    const std::vector<std::pair<std::string, std::vector<Tokens>>>& systems,
    const std::vector<std::vector<Tokens>>& references) {
  EvaluationReport report;
  for (const auto& [name, outputs] : systems) {
    if (outputs.size() != references.size()) {
      throw ContractError("evaluate: system " + name + " has " + std::to_string(outputs.size()) +
                          " outputs for " + std::to_string(references.size()) + " reference sets");
    }
    std::vector<EvalInstance> instances;
    double meteor_sum = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      instances.push_back({outputs[i], references[i]});
      meteor_sum += meteor_lite(instances.back());
    }
    SystemScores row;
    row.name = name;
    row.diversity = diversity(outputs);
    row.bleu = instances.empty() ? 0.0 : bleu(instances);
    row.meteor = instances.empty() ? 0.0 : 100.0 * meteor_sum / static_cast<double>(instances.size());
    report.rows.push_back(row);
  }
  return report;
}

std::string EvaluationReport::text() const {
  std::string out = "system               diversity      bleu    meteor\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-20s %10.4f %9.2f %9.2f\n", r.name.c_str(), r.diversity,
                  r.bleu, r.meteor);
    out += line;
  }
  return out;
}

std::string EvaluationReport::json() const {
  nlohmann::json j = nlohmann::json::object();
  j["systems"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["systems"].push_back(
        {{"name", r.name}, {"diversity", r.diversity}, {"bleu", r.bleu}, {"meteor", r.meteor}});
  }
  return j.dump(2) + "\n";
}

}  // namespace clarigen::metrics
