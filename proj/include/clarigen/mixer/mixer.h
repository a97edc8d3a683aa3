#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "clarigen/corpus/batch.h"
#include "clarigen/numerics/optimizer.h"
#include "clarigen/seq2seq/model.h"
#include "clarigen/utility/utility.h"

namespace clarigen::mixer {

using corpus::Batch;
using corpus::EncodedTriple;
using numerics::Expr;
using numerics::Graph;
using numerics::Rng;
using seq2seq::Seq2Seq;

struct MixerSchedule {
  std::size_t max_len = seq2seq::kMaxDecodeLen;
  std::size_t decrement = 2;
  std::size_t floor = 2;
};

// max(floor, max_len - decrement * epoch)
std::size_t delta_for_epoch(const MixerSchedule& schedule, std::size_t epoch);

// Scores a batch of (context, question) pairs. Questions may or may not end
// with EOS. Implementations must not consume any caller rng.
using RewardFn = std::function<std::vector<double>(const std::vector<std::vector<int>>& contexts,
                                                   const std::vector<std::vector<int>>& questions)>;

// Appends EOS unless the sequence already ends with it.
std::vector<int> with_eos(std::vector<int> ids);

// Greedy answers from the frozen answer generator for each (c, q).
std::vector<std::vector<int>> generate_answers(const Seq2Seq& answer_gen,
                                               const std::vector<std::vector<int>>& contexts,
                                               const std::vector<std::vector<int>>& questions);

// utility_score(c, q, A(c, q)) with A the greedy answer generator. Both
// models are read only; they must outlive the returned function.
RewardFn utility_reward(const Seq2Seq& answer_gen, const utility::Utility& util);

double sequence_reward(const std::vector<int>& context, const std::vector<int>& question,
                       const Seq2Seq& answer_gen, const utility::Utility& util);

// Reward of the generator's own greedy question for each context.
std::vector<double> self_critical_baseline(const Seq2Seq& gen,
                                           const std::vector<std::vector<int>>& contexts,
                                           const RewardFn& reward,
                                           std::size_t max_len = seq2seq::kMaxDecodeLen);

struct MixerLoss {
  Expr loss;
  std::vector<std::vector<int>> predicted;
  std::vector<std::size_t> suffix_length;
  // Entries are zero for rows without a sampled suffix.
  std::vector<double> reward;
  std::vector<double> baseline;
  std::vector<double> advantage;
};

// MLE over the first delta target steps plus, per row with a sampled suffix,
// -(r(q^p) - r(q^b)) * sum of the suffix log-probabilities. The advantage is a
// constant in the graph.
MixerLoss mixer_loss(Graph& g, Seq2Seq& gen, const Batch& batch, std::size_t delta,
                     const RewardFn& reward, Rng& dropout_rng, Rng& sample_rng,
                     std::size_t max_len = seq2seq::kMaxDecodeLen);

struct MixerStepStats {
  double loss = 0.0;
  double mean_reward = 0.0;     // over rows with a sampled suffix
  double mean_advantage = 0.0;  // same rows
  std::size_t sampled_rows = 0;
};

// One optimizer update on mixer_loss.
MixerStepStats generator_update(Seq2Seq& gen, numerics::Adam& adam, const Batch& batch,
                                std::size_t delta, const RewardFn& reward, Rng& dropout_rng,
                                Rng& sample_rng, std::size_t max_len = seq2seq::kMaxDecodeLen);

// Mean reward of greedy questions for the given instances' contexts.
double mean_greedy_reward(const Seq2Seq& gen, const std::vector<EncodedTriple>& data,
                          const RewardFn& reward, std::size_t batch_size = 64);

struct MaxUtilityConfig {
  MixerSchedule schedule;
  std::size_t epochs = 10;
  // Offset into the schedule: epoch e of this run uses delta_for_epoch(start_epoch + e).
  std::size_t start_epoch = 0;
  std::size_t batch_size = 32;
  std::size_t steps_per_batch = 1;
  numerics::AdamConfig adam;
  std::uint64_t seed = 1;
};

struct MaxUtilityEpoch {
  std::size_t epoch = 0;
  std::size_t delta = 0;
  double mean_loss = 0.0;          // per generator update
  double mean_train_reward = 0.0;  // sampled questions
  double held_out_reward = 0.0;    // greedy questions under eval_reward
};

struct MaxUtilityReport {
  double initial_held_out_reward = 0.0;
  std::vector<MaxUtilityEpoch> epochs;
};

struct MaxUtilityHooks {
  // Runs after the generator updates of each batch.
  std::function<void(const Batch&, std::size_t epoch)> after_batch;
  // Runs after each epoch's report entry is filled in.
  std::function<void(const MaxUtilityEpoch&)> after_epoch;
};

// Generator, dropout and sampling randomness come from fixed forks of
// config.seed, so any caller-side work in the hooks cannot shift them.
MaxUtilityReport train_max_utility(const std::vector<EncodedTriple>& train,
                                   const std::vector<EncodedTriple>& held_out, Seq2Seq& gen,
                                   const RewardFn& train_reward, const RewardFn& eval_reward,
                                   const MaxUtilityConfig& config, const MaxUtilityHooks& hooks = {});

}  // namespace clarigen::mixer
