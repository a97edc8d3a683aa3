#include "clarigen/mixer/mixer.h"

#include <algorithm>

#include "clarigen/corpus/vocab.h"
#include "clarigen/error.h"
#include "clarigen/seq2seq/decoding.h"

namespace clarigen::mixer {

using corpus::kEos;
using corpus::pad_sequences;

std::size_t delta_for_epoch(const MixerSchedule& schedule, std::size_t epoch) {
  const std::size_t drop = schedule.decrement * epoch;
  const std::size_t delta = drop >= schedule.max_len ? 0 : schedule.max_len - drop;
  return std::max(schedule.floor, delta);
}

std::vector<int> with_eos(std::vector<int> ids) {
  if (ids.empty() || ids.back() != kEos) ids.push_back(kEos);
  return ids;
}

std::vector<std::vector<int>> generate_answers(const Seq2Seq& answer_gen,
                                               const std::vector<std::vector<int>>& contexts,
                                               const std::vector<std::vector<int>>& questions) {
  if (contexts.size() != questions.size()) {
    throw DimensionError("generate_answers: " + std::to_string(contexts.size()) + " contexts vs " +
                         std::to_string(questions.size()) + " questions");
  }
  if (contexts.empty()) return {};
  std::vector<std::vector<int>> inputs;
  inputs.reserve(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (questions[i].empty()) throw ContractError("reward: empty question");
    inputs.push_back(seq2seq::answer_input(contexts[i], questions[i]));
  }
  std::vector<std::vector<int>> answers;
  answers.reserve(contexts.size());
  for (auto& d : seq2seq::greedy_decode(answer_gen, pad_sequences(inputs), corpus::kMaxAnswerLen)) {
    answers.push_back(with_eos(std::move(d.ids)));
  }
  return answers;
}

RewardFn utility_reward(const Seq2Seq& answer_gen, const utility::Utility& util) {
  return [&answer_gen, &util](const std::vector<std::vector<int>>& contexts,
                              const std::vector<std::vector<int>>& questions) {
    if (contexts.empty()) return std::vector<double>{};
    const auto answers = generate_answers(answer_gen, contexts, questions);
    std::vector<std::vector<int>> qs;
    qs.reserve(questions.size());
    for (const auto& q : questions) qs.push_back(with_eos(q));
    return utility::utility_score(util, pad_sequences(contexts), pad_sequences(qs),
                                  pad_sequences(answers));
  };
}

double sequence_reward(const std::vector<int>& context, const std::vector<int>& question,
                       const Seq2Seq& answer_gen, const utility::Utility& util) {
  return utility_reward(answer_gen, util)({context}, {question}).at(0);
}

std::vector<double> self_critical_baseline(const Seq2Seq& gen,
                                           const std::vector<std::vector<int>>& contexts,
                                           const RewardFn& reward, std::size_t max_len) {
  if (contexts.empty()) return {};
  std::vector<std::vector<int>> greedy;
  greedy.reserve(contexts.size());
  for (auto& d : seq2seq::greedy_decode(gen, pad_sequences(contexts), max_len)) {
    greedy.push_back(std::move(d.ids));
  }
  return reward(contexts, greedy);
}

MixerLoss mixer_loss(Graph& g, Seq2Seq& gen, const Batch& batch, std::size_t delta,
                     const RewardFn& reward, Rng& dropout_rng, Rng& sample_rng,
                     std::size_t max_len) {
  auto md = seq2seq::mixed_decode(g, gen, batch.context, batch.question, delta, max_len, true,
                                  dropout_rng, sample_rng);
  const std::size_t n = batch.size();
  MixerLoss out;
  out.predicted = std::move(md.predicted);
  out.suffix_length = std::move(md.suffix_length);
  out.reward.assign(n, 0.0);
  out.baseline.assign(n, 0.0);
  out.advantage.assign(n, 0.0);

  std::vector<std::size_t> rows;
  std::vector<std::vector<int>> contexts, questions;
  for (std::size_t b = 0; b < n; ++b) {
    if (out.suffix_length[b] == 0) continue;
    rows.push_back(b);
    contexts.push_back(batch.context.row(b));
    questions.push_back(out.predicted[b]);
  }

  std::optional<Expr> total;
  if (md.has_mle) total = md.mle;
  if (!rows.empty() && md.suffix_log_prob) {
    const auto r = reward(contexts, questions);
    const auto base = self_critical_baseline(gen, contexts, reward, max_len);
    std::vector<double> weights(n, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t b = rows[i];
      out.reward[b] = r[i];
      out.baseline[b] = base[i];
      out.advantage[b] = r[i] - base[i];
      weights[b] = -out.advantage[b];
    }
    Expr pg = weighted_sum(*md.suffix_log_prob, weights);
    total = total ? add(*total, pg) : pg;
  }
  out.loss = total ? *total : g.input(numerics::Tensor::scalar(0.0));
  return out;
}

MixerStepStats generator_update(Seq2Seq& gen, numerics::Adam& adam, const Batch& batch,
                                std::size_t delta, const RewardFn& reward, Rng& dropout_rng,
                                Rng& sample_rng, std::size_t max_len) {
  Graph g;
  MixerLoss ml = mixer_loss(g, gen, batch, delta, reward, dropout_rng, sample_rng, max_len);
  MixerStepStats stats;
  stats.loss = ml.loss.value()[0];
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (ml.suffix_length[b] == 0) continue;
    ++stats.sampled_rows;
    stats.mean_reward += ml.reward[b];
    stats.mean_advantage += ml.advantage[b];
  }
  if (stats.sampled_rows > 0) {
    stats.mean_reward /= static_cast<double>(stats.sampled_rows);
    stats.mean_advantage /= static_cast<double>(stats.sampled_rows);
  }
  g.backward(ml.loss);
  // A zero loss with no recorded terms leaves nothing to update.
  bool any = false;
  for (const auto& p : gen.params()) any = any || p.has_grad;
  if (any) adam.step(gen.params());
  return stats;
}

double mean_greedy_reward(const Seq2Seq& gen, const std::vector<EncodedTriple>& data,
                          const RewardFn& reward, std::size_t batch_size) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<std::vector<int>> contexts;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) {
      contexts.push_back(data[i].context);
    }
    for (double r : self_critical_baseline(gen, contexts, reward)) total += r;
  }
  return total / static_cast<double>(data.size());
}

MaxUtilityReport train_max_utility(const std::vector<EncodedTriple>& train,
                                   const std::vector<EncodedTriple>& held_out, Seq2Seq& gen,
                                   const RewardFn& train_reward, const RewardFn& eval_reward,
                                   const MaxUtilityConfig& config, const MaxUtilityHooks& hooks) {
  if (config.batch_size == 0 || config.steps_per_batch == 0) {
    throw ContractError("train_max_utility: batch size and steps per batch must be positive");
  }
  if (config.epochs > 0 && train.empty()) throw ContractError("train_max_utility: empty training set");
  MaxUtilityReport report;
  report.initial_held_out_reward = mean_greedy_reward(gen, held_out, eval_reward);

  Rng root(config.seed);
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);
  Rng sample_rng = root.fork(3);
  numerics::Adam adam(gen.params(), config.adam);

  for (std::size_t e = 0; e < config.epochs; ++e) {
    MaxUtilityEpoch ep;
    ep.epoch = e;
    ep.delta = delta_for_epoch(config.schedule, config.start_epoch + e);
    std::size_t updates = 0, sampled = 0;
    double reward_sum = 0.0;
    for (const Batch& batch : corpus::make_batches(train, config.batch_size, shuffle_rng)) {
      for (std::size_t s = 0; s < config.steps_per_batch; ++s) {
        const auto stats = generator_update(gen, adam, batch, ep.delta, train_reward, dropout_rng,
                                            sample_rng, config.schedule.max_len);
        ep.mean_loss += stats.loss;
        reward_sum += stats.mean_reward * static_cast<double>(stats.sampled_rows);
        sampled += stats.sampled_rows;
        ++updates;
      }
      if (hooks.after_batch) hooks.after_batch(batch, e);
    }
    if (updates > 0) ep.mean_loss /= static_cast<double>(updates);
    if (sampled > 0) ep.mean_train_reward = reward_sum / static_cast<double>(sampled);
    ep.held_out_reward = mean_greedy_reward(gen, held_out, eval_reward);
    report.epochs.push_back(ep);
    if (hooks.after_epoch) hooks.after_epoch(ep);
  }
  return report;
}

}  // namespace clarigen::mixer
