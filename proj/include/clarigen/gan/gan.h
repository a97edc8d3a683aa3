#pragma once

#include <functional>
#include <vector>

#include "clarigen/mixer/mixer.h"
#include "clarigen/utility/utility.h"

namespace clarigen::gan {

using corpus::Batch;
using corpus::EncodedTriple;
using mixer::MixerSchedule;
using seq2seq::Seq2Seq;
using utility::LabeledTriple;
using utility::Utility;

struct GanConfig {
  std::size_t epochs = 10;
  // Schedule offset so Δ continues from an earlier Max-Utility run.
  std::size_t start_epoch = 0;
  std::size_t batch_size = 32;
  std::size_t gen_steps_per_round = 1;
  std::size_t disc_steps_per_round = 1;
  bool update_discriminator = true;
  std::size_t beam = 5;
  MixerSchedule schedule;
  numerics::AdamConfig gen_adam;
  numerics::AdamConfig disc_adam;
  std::uint64_t seed = 1;
};

struct GanRoundReport {
  std::size_t round = 0;  // 0 is the state before training
  std::size_t delta = 0;
  double generator_loss = 0.0;
  double generator_reward = 0.0;     // mean live-discriminator reward of sampled questions
  double discriminator_loss = 0.0;   // mean BCE per instance over the round
  double probe_accuracy = 0.0;       // live discriminator on the held-out probe
  double probe_score = 0.0;          // pretrained discriminator on generated probe triples
  double live_probe_score = 0.0;     // live discriminator on generated probe triples
  double held_out_reward = 0.0;      // greedy questions under the frozen utility reward
};

// Positives (c, q, A(c, q)) and negatives (c, m(c), A(c, m(c))) with m the
// beam decode of the current generator and A the greedy answer generator.
// Positive answers may be supplied from a cache indexed like `instances`.
std::vector<LabeledTriple> build_disc_batch(const std::vector<EncodedTriple>& instances,
                                            const Seq2Seq& gen, const Seq2Seq& answer_gen,
                                            std::size_t beam = 5,
                                            const std::vector<std::vector<int>>* true_answers = nullptr);

// One optimizer step on the summed BCE; returns the mean BCE per instance
// before the update.
double discriminator_step(const std::vector<LabeledTriple>& batch, Utility& disc,
                          numerics::Adam& adam);

// A Max-Utility update whose reward is the current discriminator.
mixer::MixerStepStats generator_step(Seq2Seq& gen, numerics::Adam& adam, const Batch& batch,
                                     std::size_t delta, const Seq2Seq& answer_gen,
                                     const Utility& disc, numerics::Rng& dropout_rng,
                                     numerics::Rng& sample_rng);

struct ProbeResult {
  double accuracy = 0.0;
  double live_score = 0.0;
  double fixed_score = 0.0;
};

ProbeResult probe(const std::vector<LabeledTriple>& probe_batch, const Utility& live,
                  const Utility& fixed);

// Alternates generator and discriminator updates per batch. Generator-side
// randomness matches train_max_utility with the same seed, so disabling
// discriminator updates reproduces a Max-Utility run exactly.
std::vector<GanRoundReport> train_gan(const std::vector<EncodedTriple>& train,
                                      const std::vector<EncodedTriple>& held_out, Seq2Seq& gen,
                                      const Seq2Seq& answer_gen, Utility& disc,
                                      const Utility& reward_utility, const GanConfig& config,
                                      const std::function<void(const GanRoundReport&)>& on_round = {});

mixer::MaxUtilityConfig max_utility_config(const GanConfig& config);

}  // namespace clarigen::gan
