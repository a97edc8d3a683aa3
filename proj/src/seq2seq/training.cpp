#include "clarigen/seq2seq/training.h"

#include <algorithm>

#include "clarigen/error.h"

namespace clarigen::seq2seq {
namespace {

void collate(const std::vector<Example>& data, const std::vector<std::size_t>& order,
             std::size_t start, std::size_t end, Sequences& src, Sequences& tgt) {
  std::vector<std::vector<int>> s, t;
  for (std::size_t i = start; i < end; ++i) {
    s.push_back(data[order[i]].source);
    t.push_back(data[order[i]].target);
  }
  src = corpus::pad_sequences(s);
  tgt = corpus::pad_sequences(t);
}

}  // namespace

std::vector<Example> question_examples(const std::vector<corpus::EncodedTriple>& data) {
  std::vector<Example> out;
  for (const auto& t : data) out.push_back({t.context, t.question});
  return out;
}

std::vector<Example> answer_examples(const std::vector<corpus::EncodedTriple>& data) {
  std::vector<Example> out;
  for (const auto& t : data) out.push_back({answer_input(t.context, t.question), t.answer});
  return out;
}

double held_out_accuracy(const Seq2Seq& model, const std::vector<Example>& data,
                         std::size_t batch_size) {
  TokenAccuracy acc;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    Sequences src, tgt;
    collate(data, order, start, std::min(data.size(), start + batch_size), src, tgt);
    const auto part = teacher_forced_accuracy(model, src, tgt);
    acc.correct += part.correct;
    acc.total += part.total;
  }
  return acc.rate();
}

std::vector<MleEpoch> train_mle(const std::vector<Example>& train,
                                const std::vector<Example>& held_out, Seq2Seq& model,
                                const MleTrainConfig& config,
                                const std::function<void(const MleEpoch&)>& on_epoch) {
  if (config.batch_size == 0) throw ContractError("train_mle: batch size must be positive");
  if (config.epochs > 0 && train.empty()) throw ContractError("train_mle: empty training set");
  Rng root(config.seed);
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);
  numerics::Adam adam(model.params(), config.adam);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<MleEpoch> report;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    corpus::shuffle_indices(order, shuffle_rng);
    double total = 0.0, tokens = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      Sequences src, tgt;
      collate(train, order, start, std::min(order.size(), start + config.batch_size), src, tgt);
      Graph g;
      Expr loss = mle_loss(g, model, src, tgt, true, dropout_rng);
      total += loss.value()[0];
      for (double m : tgt.mask) tokens += m;
      g.backward(loss);
      adam.step(model.params());
    }
    MleEpoch ep{e, tokens > 0 ? total / tokens : 0.0, held_out_accuracy(model, held_out)};
    report.push_back(ep);
    if (on_epoch) on_epoch(ep);
  }
  return report;
}

}  // namespace clarigen::seq2seq
