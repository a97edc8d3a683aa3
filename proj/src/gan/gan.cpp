#include "clarigen/gan/gan.h"

#include <cmath>

#include "clarigen/error.h"
#include "clarigen/seq2seq/decoding.h"

namespace clarigen::gan {

using utility::Provenance;

std::vector<LabeledTriple> build_disc_batch(const std::vector<EncodedTriple>& instances,
                                            const Seq2Seq& gen, const Seq2Seq& answer_gen,
                                            std::size_t beam,
                                            const std::vector<std::vector<int>>* true_answers) {
  if (true_answers && true_answers->size() != instances.size()) {
    throw DimensionError("build_disc_batch: answer cache size mismatch");
  }
  std::vector<std::vector<int>> contexts, true_q, gen_q;
  for (const auto& t : instances) {
    contexts.push_back(t.context);
    true_q.push_back(t.question);
    gen_q.push_back(mixer::with_eos(seq2seq::beam_search(gen, t.context, beam).ids));
  }
  const auto pos_answers =
      true_answers ? *true_answers : mixer::generate_answers(answer_gen, contexts, true_q);
  const auto neg_answers = mixer::generate_answers(answer_gen, contexts, gen_q);
  std::vector<LabeledTriple> out;
  out.reserve(2 * instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out.push_back({{contexts[i], mixer::with_eos(true_q[i]), pos_answers[i]}, 1.0,
                   Provenance::kTruePair, i, i});
    out.push_back({{contexts[i], gen_q[i], neg_answers[i]}, 0.0, Provenance::kGenerated, i, i});
  }
  return out;
}

double discriminator_step(const std::vector<LabeledTriple>& batch, Utility& disc,
                          numerics::Adam& adam) {
  bool pos = false, neg = false;
  std::vector<const LabeledTriple*> items;
  for (const auto& t : batch) {
    (t.label > 0.5 ? pos : neg) = true;
    items.push_back(&t);
  }
  if (!pos || !neg) throw ContractError("discriminator_step: batch needs both labels");
  numerics::Graph g;
  auto loss = utility::utility_bce(g, disc, items);
  const double value = loss.value()[0] / static_cast<double>(batch.size());
  g.backward(loss);
  adam.step(disc.params());
  return value;
}

mixer::MixerStepStats generator_step(Seq2Seq& gen, numerics::Adam& adam, const Batch& batch,
                                     std::size_t delta, const Seq2Seq& answer_gen,
                                     const Utility& disc, numerics::Rng& dropout_rng,
                                     numerics::Rng& sample_rng) {
  return mixer::generator_update(gen, adam, batch, delta, mixer::utility_reward(answer_gen, disc),
                                 dropout_rng, sample_rng);
}

ProbeResult probe(const std::vector<LabeledTriple>& probe_batch, const Utility& live,
                  const Utility& fixed) {
  ProbeResult r;
  if (probe_batch.empty()) return r;
  r.accuracy = utility::utility_accuracy(live, probe_batch);
  std::vector<std::vector<int>> c, q, a;
  for (const auto& t : probe_batch) {
    if (t.label > 0.5) continue;
    c.push_back(t.triple.context);
    q.push_back(t.triple.question);
    a.push_back(t.triple.answer);
  }
  if (c.empty()) return r;
  const auto cs = corpus::pad_sequences(c), qs = corpus::pad_sequences(q),
             as = corpus::pad_sequences(a);
  for (double s : utility::utility_score(live, cs, qs, as)) r.live_score += s;
  for (double s : utility::utility_score(fixed, cs, qs, as)) r.fixed_score += s;
  r.live_score /= static_cast<double>(c.size());
  r.fixed_score /= static_cast<double>(c.size());
  return r;
}

mixer::MaxUtilityConfig max_utility_config(const GanConfig& config) {
  mixer::MaxUtilityConfig m;
  m.schedule = config.schedule;
  m.epochs = config.epochs;
  m.start_epoch = config.start_epoch;
  m.batch_size = config.batch_size;
  m.steps_per_batch = config.gen_steps_per_round;
  m.adam = config.gen_adam;
  m.seed = config.seed;
  return m;
}

std::vector<GanRoundReport> train_gan(const std::vector<EncodedTriple>& train,
                                      const std::vector<EncodedTriple>& held_out, Seq2Seq& gen,
                                      const Seq2Seq& answer_gen, Utility& disc,
                                      const Utility& reward_utility, const GanConfig& config,
                                      const std::function<void(const GanRoundReport&)>& on_round) {
  if (config.gen_steps_per_round == 0 || config.disc_steps_per_round == 0) {
    throw ContractError("train_gan: generator and discriminator steps per round must be at least 1");
  }
  const Utility yardstick = disc;
  numerics::Adam disc_adam(disc.params(), config.disc_adam);

  std::vector<std::vector<int>> contexts, questions;
  for (const auto& t : train) {
    contexts.push_back(t.context);
    questions.push_back(t.question);
  }
  const auto true_answers = mixer::generate_answers(answer_gen, contexts, questions);

  std::vector<GanRoundReport> reports;
  auto probe_now = [&](GanRoundReport& rep) {
    const auto p = probe(build_disc_batch(held_out, gen, answer_gen, config.beam), disc, yardstick);
    rep.probe_accuracy = p.accuracy;
    rep.live_probe_score = p.live_score;
    rep.probe_score = p.fixed_score;
  };

  double disc_loss = 0.0;
  std::size_t disc_updates = 0;
  mixer::MaxUtilityHooks hooks;
  hooks.after_batch = [&](const Batch& batch, std::size_t) {
    if (!config.update_discriminator) return;
    std::vector<EncodedTriple> items;
    std::vector<std::vector<int>> answers;
    for (std::size_t i : batch.index) {
      items.push_back(train[i]);
      answers.push_back(true_answers[i]);
    }
    const auto disc_batch = build_disc_batch(items, gen, answer_gen, config.beam, &answers);
    for (std::size_t s = 0; s < config.disc_steps_per_round; ++s) {
      disc_loss += discriminator_step(disc_batch, disc, disc_adam);
      ++disc_updates;
    }
  };
  hooks.after_epoch = [&](const mixer::MaxUtilityEpoch& ep) {
    GanRoundReport rep;
    rep.round = ep.epoch + 1;
    rep.delta = ep.delta;
    rep.generator_loss = ep.mean_loss;
    rep.generator_reward = ep.mean_train_reward;
    rep.held_out_reward = ep.held_out_reward;
    rep.discriminator_loss = disc_updates ? disc_loss / static_cast<double>(disc_updates) : 0.0;
    disc_loss = 0.0;
    disc_updates = 0;
    probe_now(rep);
    reports.push_back(rep);
    if (on_round) on_round(rep);
  };

  GanRoundReport start;
  start.delta = mixer::delta_for_epoch(config.schedule, config.start_epoch);
  probe_now(start);
  start.held_out_reward =
      mixer::mean_greedy_reward(gen, held_out, mixer::utility_reward(answer_gen, reward_utility));
  reports.push_back(start);
  if (on_round) on_round(start);

  mixer::train_max_utility(train, held_out, gen, mixer::utility_reward(answer_gen, disc),
                           mixer::utility_reward(answer_gen, reward_utility),
                           max_utility_config(config), hooks);
  return reports;
}

}  // namespace clarigen::gan
