#pragma once

#include <string>
#include <utility>
#include <vector>

#include "clarigen/corpus/text.h"

namespace clarigen::metrics {

using corpus::Tokens;

struct EvalInstance {
  Tokens hypothesis;
  std::vector<Tokens> references;
};

// Distinct n-grams over total n-grams, pooled across all outputs; 0 when
// there are no n-grams.
double diversity(const std::vector<Tokens>& outputs, std::size_t n = 3);

struct BleuStats {
  std::vector<std::size_t> matches;  // clipped, per order
  std::vector<std::size_t> totals;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;  // closest reference per instance, ties to the shorter
};

BleuStats bleu_stats(const std::vector<EvalInstance>& instances, std::size_t max_n = 4);

// Corpus BLEU x 100 without smoothing.
double bleu(const std::vector<EvalInstance>& instances, std::size_t max_n = 4);

// Suffix stripping for s, es, ed and ing, undoing consonant doubling.
std::string stem(const std::string& word);

struct MeteorParams {
  double alpha = 0.9;
  double gamma = 0.5;
  double beta = 3.0;
};

// Exact then stem unigram matching against each reference; the best score
// over references in [0, 1].
double meteor_lite(const EvalInstance& instance, const MeteorParams& params = {});

struct SystemScores {
  std::string name;
  double diversity = 0.0;
  double bleu = 0.0;
  double meteor = 0.0;  // mean meteor_lite x 100
};

struct EvaluationReport {
  std::vector<SystemScores> rows;
  std::string text() const;
  std::string json() const;
};

EvaluationReport evaluate_systems(
    const std::vector<std::pair<std::string, std::vector<Tokens>>>& systems,
    const std::vector<std::vector<Tokens>>& references);

}  // namespace clarigen::metrics
