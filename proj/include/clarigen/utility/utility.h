#pragma once

#include <vector>

#include "clarigen/corpus/batch.h"
#include "clarigen/numerics/optimizer.h"
#include "clarigen/seq2seq/lstm.h"

namespace clarigen::utility {

using corpus::EncodedTriple;
using corpus::Sequences;
using numerics::Expr;
using numerics::Graph;
using numerics::ParamId;
using numerics::Rng;

struct UtilityConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 200;
  std::size_t hidden = 100;
  std::size_t scorer_hidden = 100;
};

// Three independent single-layer LSTM encoders (context, question, answer)
// whose time-averaged outputs feed a one-hidden-layer tanh scorer.
class Utility {
 public:
  Utility(const UtilityConfig& config, Rng& init);

  const UtilityConfig& config() const { return config_; }
  numerics::ParameterSet& params() { return params_; }
  const numerics::ParameterSet& params() const { return params_; }

  ParamId embedding() const { return embedding_; }
  const seq2seq::LstmLayer& context_encoder() const { return context_; }
  const seq2seq::LstmLayer& question_encoder() const { return question_; }
  const seq2seq::LstmLayer& answer_encoder() const { return answer_; }
  ParamId w1() const { return w1_; }
  ParamId b1() const { return b1_; }
  ParamId w2() const { return w2_; }
  ParamId b2() const { return b2_; }

  // Zeroes the output layer so every logit is 0 (score 0.5).
  void zero_scorer();

 private:
  UtilityConfig config_;
  numerics::ParameterSet params_;
  ParamId embedding_;
  seq2seq::LstmLayer context_, question_, answer_;
  ParamId w1_, b1_, w2_, b2_;
};

// Mean over unmasked positions of the encoder outputs, B x H. Every row needs
// at least one unmasked position.
Expr encode_avg(Graph& g, Utility& util, const seq2seq::LstmLayer& encoder, const Sequences& seqs);

// B x 1 logits of F_UTILITY(c̄ ⧺ q̄ ⧺ ā).
Expr utility_logits(Graph& g, Utility& util, const Sequences& c, const Sequences& q,
                    const Sequences& a);

// Probabilities sigmoid(logit) in inference mode.
std::vector<double> utility_score(const Utility& util, const Sequences& c, const Sequences& q,
                                  const Sequences& a);

enum class Provenance { kTruePair, kRandomPair, kGenerated };

struct LabeledTriple {
  EncodedTriple triple;
  double label = 0.0;
  Provenance provenance = Provenance::kTruePair;
  std::size_t source = 0;  // index of the context's own instance
  std::size_t donor = 0;   // index the (question, answer) came from
};

// One positive per instance followed by `ratio` negatives that borrow the
// question and its paired answer from a uniformly drawn other instance.
std::vector<LabeledTriple> make_negatives(const std::vector<EncodedTriple>& data, Rng& rng,
                                          std::size_t ratio = 1);

struct UtilityTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  numerics::AdamConfig adam;
  std::uint64_t seed = 1;
};

struct UtilityReport {
  double initial_loss = 0.0;             // mean BCE per training instance before training
  std::vector<double> epoch_loss;        // mean BCE per training instance, per epoch
  std::vector<double> held_out_accuracy; // after each epoch
  std::size_t train_size = 0;
  std::size_t held_out_size = 0;
};

// Deterministic 90/10 split keyed on the context ids.
bool utility_held_out(const EncodedTriple& t);

// Summed BCE over a list of labeled triples (one recording-graph loss).
Expr utility_bce(Graph& g, Utility& util, const std::vector<const LabeledTriple*>& items);

double utility_accuracy(const Utility& util, const std::vector<LabeledTriple>& items,
                        std::size_t batch_size = 64);
double mean_bce(const Utility& util, const std::vector<LabeledTriple>& items,
                std::size_t batch_size = 64);

UtilityReport pretrain_utility(const std::vector<LabeledTriple>& labeled, Utility& util,
                               const UtilityTrainConfig& config);

}  // namespace clarigen::utility
