#include "clarigen/utility/utility.h"

#include <cmath>
#include <string>

#include "clarigen/corpus/text.h"
#include "clarigen/corpus/vocab.h"
#include "clarigen/error.h"

namespace clarigen::utility {

using numerics::Tensor;

Utility::Utility(const UtilityConfig& config, Rng& init) : config_(config) {
  if (config.vocab_size < static_cast<std::size_t>(corpus::kNumSpecials) || config.embed_dim == 0 ||
      config.hidden == 0 || config.scorer_hidden == 0) {
    throw ContractError("Utility: vocabulary and dimensions must be positive");
  }
  const std::size_t e = config.embed_dim, h = config.hidden, s = config.scorer_hidden;
  embedding_ = params_.add_uniform("utility.embedding", {config.vocab_size, e}, init, 0.1);
  for (double& x : params_[embedding_].value.row(corpus::kPad)) x = 0.0;
  context_ = seq2seq::add_lstm_layer(params_, "utility.context", e, h, init);
  question_ = seq2seq::add_lstm_layer(params_, "utility.question", e, h, init);
  answer_ = seq2seq::add_lstm_layer(params_, "utility.answer", e, h, init);
  w1_ = params_.add_uniform("utility.scorer.w1", {3 * h, s}, init, 0.1);
  b1_ = params_.add_zeros("utility.scorer.b1", {1, s});
  w2_ = params_.add_uniform("utility.scorer.w2", {s, 1}, init, 0.1);
  b2_ = params_.add_zeros("utility.scorer.b2", {1, 1});
}

void Utility::zero_scorer() {
  params_[w2_].value.fill(0.0);
  params_[b2_].value.fill(0.0);
}

Expr encode_avg(Graph& g, Utility& util, const seq2seq::LstmLayer& encoder, const Sequences& seqs) {
  if (seqs.batch == 0) throw ContractError("encode_avg: empty batch");
  for (int len : seqs.lengths) {
    if (len == 0) throw ContractError("encode_avg: empty sequence");
  }
  auto& params = util.params();
  Expr table = g.param(params[util.embedding()]);
  std::vector<seq2seq::LstmState> state{seq2seq::zero_state(g, seqs.batch, encoder.hidden)};
  const std::vector<seq2seq::LstmLayer> layers{encoder};
  Rng unused(0);
  std::vector<Expr> outputs;
  outputs.reserve(seqs.length);
  for (std::size_t t = 0; t < seqs.length; ++t) {
    const auto ids = seqs.step(t);
    std::vector<bool> active(seqs.batch);
    for (std::size_t b = 0; b < seqs.batch; ++b) active[b] = seqs.mask[b * seqs.length + t] != 0.0;
    outputs.push_back(seq2seq::lstm_stack_step(g, params, layers, gather_rows(table, ids), state,
                                               active, 0.0, false, unused));
  }
  Tensor weights({seqs.batch, seqs.length});
  for (std::size_t b = 0; b < seqs.batch; ++b) {
    const double inv = 1.0 / seqs.lengths[b];
    for (std::size_t t = 0; t < seqs.length; ++t) {
      weights.at(b, t) = seqs.mask[b * seqs.length + t] * inv;
    }
  }
  return batched_weighted_sum(g.input(std::move(weights)), stack_steps(outputs));
}

Expr utility_logits(Graph& g, Utility& util, const Sequences& c, const Sequences& q,
                    const Sequences& a) {
  if (c.batch != q.batch || c.batch != a.batch) {
    throw DimensionError("utility: batch sizes " + std::to_string(c.batch) + ", " +
                         std::to_string(q.batch) + ", " + std::to_string(a.batch) + " differ");
  }
  auto& p = util.params();
  const Expr parts[] = {encode_avg(g, util, util.context_encoder(), c),
                        encode_avg(g, util, util.question_encoder(), q),
                        encode_avg(g, util, util.answer_encoder(), a)};
  Expr hidden = tanh(add_bias(matmul(concat_cols(parts), g.param(p[util.w1()])), g.param(p[util.b1()])));
  return add_bias(matmul(hidden, g.param(p[util.w2()])), g.param(p[util.b2()]));
}

std::vector<double> utility_score(const Utility& util, const Sequences& c, const Sequences& q,
                                  const Sequences& a) {
  auto& u = const_cast<Utility&>(util);  // inference graph: parameters are only read
  Graph g(false);
  const Tensor& logits = utility_logits(g, u, c, q, a).value();
  std::vector<double> out(c.batch);
  for (std::size_t b = 0; b < c.batch; ++b) out[b] = 1.0 / (1.0 + std::exp(-logits[b]));
  return out;
}

std::vector<LabeledTriple> make_negatives(const std::vector<EncodedTriple>& data, Rng& rng,
                                          std::size_t ratio) {
  if (data.size() < 2) throw ContractError("make_negatives: dataset needs at least 2 instances");
  std::vector<LabeledTriple> out;
  out.reserve(data.size() * (1 + ratio));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back({data[i], 1.0, Provenance::kTruePair, i, i});
    for (std::size_t k = 0; k < ratio; ++k) {
      std::size_t donor = rng.index(data.size() - 1);
      if (donor >= i) ++donor;
      EncodedTriple t{data[i].context, data[donor].question, data[donor].answer};
      out.push_back({std::move(t), 0.0, Provenance::kRandomPair, i, donor});
    }
  }
  return out;
}

bool utility_held_out(const EncodedTriple& t) {
  std::string key;
  for (int id : t.context) key += std::to_string(id) + ' ';
  return corpus::fnv1a(key) % 10 == 0;
}

namespace {

struct LabeledBatch {
  Sequences c, q, a;
  std::vector<double> labels;
};

LabeledBatch collate(const std::vector<const LabeledTriple*>& items) {
  std::vector<std::vector<int>> c, q, a;
  LabeledBatch out;
  for (const LabeledTriple* t : items) {
    c.push_back(t->triple.context);
    q.push_back(t->triple.question);
    a.push_back(t->triple.answer);
    out.labels.push_back(t->label);
  }
  out.c = corpus::pad_sequences(c);
  out.q = corpus::pad_sequences(q);
  out.a = corpus::pad_sequences(a);
  return out;
}

template <typename Fn>
void for_each_chunk(const std::vector<LabeledTriple>& items, std::size_t batch_size, Fn fn) {
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    std::vector<const LabeledTriple*> chunk;
    for (std::size_t i = start; i < std::min(items.size(), start + batch_size); ++i) {
      chunk.push_back(&items[i]);
    }
    fn(chunk);
  }
}

void require_both_labels(const std::vector<LabeledTriple>& items, const char* where) {
  bool pos = false, neg = false;
  for (const auto& t : items) (t.label > 0.5 ? pos : neg) = true;
  if (!pos || !neg) throw ContractError(std::string(where) + ": stream needs both labels");
}

}  // namespace

Expr utility_bce(Graph& g, Utility& util, const std::vector<const LabeledTriple*>& items) {
  LabeledBatch b = collate(items);
  return bce_with_logits(utility_logits(g, util, b.c, b.q, b.a), b.labels);
}

double utility_accuracy(const Utility& util, const std::vector<LabeledTriple>& items,
                        std::size_t batch_size) {
  if (items.empty()) return 0.0;
  std::size_t correct = 0;
  for_each_chunk(items, batch_size, [&](const std::vector<const LabeledTriple*>& chunk) {
    LabeledBatch b = collate(chunk);
    const auto scores = utility_score(util, b.c, b.q, b.a);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if ((scores[i] > 0.5) == (b.labels[i] > 0.5)) ++correct;
    }
  });
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

double mean_bce(const Utility& util, const std::vector<LabeledTriple>& items,
                std::size_t batch_size) {
  if (items.empty()) return 0.0;
  auto& u = const_cast<Utility&>(util);
  double total = 0.0;
  for_each_chunk(items, batch_size, [&](const std::vector<const LabeledTriple*>& chunk) {
    Graph g(false);
    total += utility_bce(g, u, chunk).value()[0];
  });
  return total / static_cast<double>(items.size());
}

UtilityReport pretrain_utility(const std::vector<LabeledTriple>& labeled, Utility& util,
                               const UtilityTrainConfig& config) {
  require_both_labels(labeled, "pretrain_utility");
  if (config.batch_size == 0) throw ContractError("pretrain_utility: batch size must be positive");
  std::vector<LabeledTriple> train, held_out;
  for (const auto& t : labeled) (utility_held_out(t.triple) ? held_out : train).push_back(t);
  if (train.empty()) throw ContractError("pretrain_utility: no training instances after split");

  UtilityReport report;
  report.train_size = train.size();
  report.held_out_size = held_out.size();
  report.initial_loss = mean_bce(util, train);

  Rng rng(config.seed);
  numerics::Adam adam(util.params(), config.adam);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    corpus::shuffle_indices(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const LabeledTriple*> chunk;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        chunk.push_back(&train[order[i]]);
      }
      Graph g;
      Expr loss = utility_bce(g, util, chunk);
      total += loss.value()[0];
      g.backward(loss);
      adam.step(util.params());
    }
    report.epoch_loss.push_back(total / static_cast<double>(train.size()));
    report.held_out_accuracy.push_back(utility_accuracy(util, held_out));
  }
  return report;
}

}  // namespace clarigen::utility
