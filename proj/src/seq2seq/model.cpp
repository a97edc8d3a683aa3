#include "clarigen/seq2seq/model.h"

#include "clarigen/corpus/vocab.h"
#include "clarigen/error.h"

namespace clarigen::seq2seq {

using corpus::kEos;
using corpus::kPad;
using corpus::kSos;

Seq2Seq::Seq2Seq(const Seq2SeqConfig& config, Rng& init, const Tensor* embeddings)
    : config_(config) {
  if (config.vocab_size < static_cast<std::size_t>(corpus::kNumSpecials) || config.hidden == 0 ||
      config.embed_dim == 0 || config.layers == 0) {
    throw ContractError("Seq2Seq: vocabulary, dimensions and layer count must be positive");
  }
  const std::size_t v = config.vocab_size, e = config.embed_dim, h = config.hidden;
  if (embeddings != nullptr) {
    if (embeddings->shape() != numerics::Shape{v, e}) {
      throw DimensionError("Seq2Seq: embedding table " + numerics::shape_string(embeddings->shape()) +
                           " does not match vocabulary " + std::to_string(v) + " x " +
                           std::to_string(e));
    }
    embedding_ = params_.add("embedding", *embeddings);
  } else {
    embedding_ = params_.add_uniform("embedding", {v, e}, init, 0.1);
    for (double& x : params_[embedding_].value.row(kPad)) x = 0.0;
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    encoder_.push_back(
        add_lstm_layer(params_, "encoder.l" + std::to_string(l), l == 0 ? e : h, h, init));
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    decoder_.push_back(
        add_lstm_layer(params_, "decoder.l" + std::to_string(l), l == 0 ? e : h, h, init));
  }
  w_a_ = params_.add_uniform("attention.w_a", {h, h}, init, 0.1);
  w_c_ = params_.add_uniform("combine.w_c", {2 * h, h}, init, 0.1);
  w_s_ = params_.add_uniform("output.w_s", {h, v}, init, 0.1);
  b_s_ = params_.add_zeros("output.b_s", {1, v});
}

Expr embed(Graph& g, Seq2Seq& model, std::span<const int> ids) {
  auto& p = model.params()[model.embedding()];
  Expr table = model.config().freeze_embeddings ? g.input(p.value) : g.param(p);
  return gather_rows(table, ids);
}

EncoderOutput encode(Graph& g, Seq2Seq& model, const Sequences& src, bool train, Rng& rng) {
  const auto& cfg = model.config();
  EncoderOutput out;
  out.batch = src.batch;
  out.length = src.length;
  out.mask = src.mask;
  for (std::size_t l = 0; l < cfg.layers; ++l) out.final.push_back(zero_state(g, src.batch, cfg.hidden));
  std::vector<Expr> tops;
  tops.reserve(src.length);
  for (std::size_t t = 0; t < src.length; ++t) {
    const auto ids = src.step(t);
    const auto m = src.step_mask(t);
    std::vector<bool> active(m.size());
    for (std::size_t b = 0; b < m.size(); ++b) active[b] = m[b] != 0.0;
    tops.push_back(lstm_stack_step(g, model.params(), model.encoder(), embed(g, model, ids),
                                   out.final, active, cfg.dropout, train, rng));
  }
  if (!tops.empty()) out.states = stack_steps(tops);
  return out;
}

Attention attend(Graph& g, Seq2Seq& model, Expr h_t, const EncoderOutput& enc) {
  if (!enc.states) throw ContractError("attend: empty source sequence");
  Expr query = matmul(h_t, g.param(model.params()[model.w_a()]));
  Expr weights = masked_softmax_rows(batched_dot(query, *enc.states), enc.mask);
  return {batched_weighted_sum(weights, *enc.states), weights};
}

StepOutput decode_step(Graph& g, Seq2Seq& model, std::span<const int> prev,
                       std::vector<LstmState>& state, const EncoderOutput& enc, bool train,
                       Rng& rng, const std::vector<bool>& active) {
  const auto& cfg = model.config();
  const std::vector<bool> all(prev.size(), true);
  Expr h_t = lstm_stack_step(g, model.params(), model.decoder(), embed(g, model, prev), state,
                             active.empty() ? all : active, cfg.dropout, train, rng);
  Attention att = attend(g, model, h_t, enc);
  const Expr parts[] = {att.context, h_t};
  Expr h_tilde = tanh(matmul(concat_cols(parts), g.param(model.params()[model.w_c()])));
  Expr logits = add_bias(matmul(h_tilde, g.param(model.params()[model.w_s()])),
                         g.param(model.params()[model.b_s()]));
  return {logits, h_tilde, att};
}

std::vector<bool> emittable(std::size_t vocab_size) {
  std::vector<bool> allowed(vocab_size, true);
  allowed[kPad] = false;
  allowed[kSos] = false;
  return allowed;
}

namespace {

std::vector<int> step_input(const Sequences& tgt, std::size_t t) {
  if (t == 0) return std::vector<int>(tgt.batch, kSos);
  return tgt.step(t - 1);
}

// Teacher-forced loss over the first `steps` target positions.
std::optional<Expr> teacher_force(Graph& g, Seq2Seq& model, const EncoderOutput& enc,
                                  const Sequences& tgt, std::size_t steps,
                                  std::vector<LstmState>& state, bool train, Rng& rng) {
  std::optional<Expr> loss;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto prev = step_input(tgt, t);
    StepOutput out = decode_step(g, model, prev, state, enc, train, rng);
    const auto targets = tgt.step(t);
    const auto mask = tgt.step_mask(t);
    Expr ce = cross_entropy(out.logits, targets, mask);
    loss = loss ? add(*loss, ce) : ce;
  }
  return loss;
}

void check_batch(const Sequences& src, const Sequences& tgt) {
  if (src.batch != tgt.batch) {
    throw DimensionError("source batch " + std::to_string(src.batch) + " vs target batch " +
                         std::to_string(tgt.batch));
  }
}

}  // namespace

Expr mle_loss(Graph& g, Seq2Seq& model, const Sequences& src, const Sequences& tgt, bool train,
              Rng& rng) {
  check_batch(src, tgt);
  EncoderOutput enc = encode(g, model, src, train, rng);
  std::vector<LstmState> state = enc.final;
  auto loss = teacher_force(g, model, enc, tgt, tgt.length, state, train, rng);
  return loss ? *loss : g.input(Tensor::scalar(0.0));
}

MixedDecode mixed_decode(Graph& g, Seq2Seq& model, const Sequences& src, const Sequences& tgt,
                         std::size_t delta, std::size_t max_len, bool train, Rng& dropout_rng,
                         Rng& sample_rng) {
  check_batch(src, tgt);
  if (delta > max_len) {
    throw ContractError("mixed_decode: delta " + std::to_string(delta) + " exceeds max_len " +
                        std::to_string(max_len));
  }
  const std::size_t batch = tgt.batch;
  EncoderOutput enc = encode(g, model, src, train, dropout_rng);
  std::vector<LstmState> state = enc.final;
  MixedDecode out;
  const std::size_t forced = std::min(delta, tgt.length);
  if (auto loss = teacher_force(g, model, enc, tgt, forced, state, train, dropout_rng)) {
    out.mle = *loss;
    out.has_mle = true;
  }

  out.predicted.resize(batch);
  out.suffix_length.assign(batch, 0);
  std::vector<bool> sampling(batch, false);
  std::vector<int> prev(batch, kPad);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto gold = tgt.row(b);
    if (gold.size() > delta && delta < max_len) {
      sampling[b] = true;
      out.predicted[b].assign(gold.begin(), gold.begin() + static_cast<long>(delta));
      prev[b] = delta == 0 ? kSos : gold[delta - 1];
    } else {
      out.predicted[b] = gold;
    }
  }

  const auto allowed = emittable(model.config().vocab_size);
  std::optional<Expr> total;
  for (std::size_t t = delta; t < max_len; ++t) {
    if (std::none_of(sampling.begin(), sampling.end(), [](bool s) { return s; })) break;
    StepOutput step = decode_step(g, model, prev, state, enc, train, dropout_rng);
    Expr logp = log_softmax_rows_restricted(step.logits, allowed);
    const numerics::Tensor& lp = logp.value();
    const std::size_t v = lp.cols();
    std::vector<int> chosen(batch, kEos);
    Tensor weight({batch, 1});
    std::vector<double> probs(v);
    for (std::size_t b = 0; b < batch; ++b) {
      if (!sampling[b]) continue;
      for (std::size_t j = 0; j < v; ++j) probs[j] = allowed[j] ? std::exp(lp.at(b, j)) : 0.0;
      chosen[b] = static_cast<int>(sample_rng.categorical(probs));
      weight[b] = 1.0;
      out.predicted[b].push_back(chosen[b]);
      ++out.suffix_length[b];
    }
    Expr term = mul(pick(logp, chosen), g.input(std::move(weight)));
    total = total ? add(*total, term) : term;
    for (std::size_t b = 0; b < batch; ++b) {
      if (!sampling[b]) {
        prev[b] = kPad;
      } else if (chosen[b] == kEos) {
        sampling[b] = false;
        prev[b] = kPad;
      } else {
        prev[b] = chosen[b];
      }
    }
  }
  out.suffix_log_prob = total;
  return out;
}

std::vector<int> answer_input(const std::vector<int>& context, const std::vector<int>& question) {
  std::vector<int> out = context;
  out.push_back(kEos);
  for (int id : question) {
    if (id == kEos) break;
    out.push_back(id);
  }
  return out;
}

TokenAccuracy teacher_forced_accuracy(const Seq2Seq& model, const Sequences& src,
                                      const Sequences& tgt) {
  check_batch(src, tgt);
  auto& m = const_cast<Seq2Seq&>(model);  // inference graph: parameters are only read
  Graph g(false);
  Rng unused(0);
  EncoderOutput enc = encode(g, m, src, false, unused);
  std::vector<LstmState> state = enc.final;
  TokenAccuracy acc;
  for (std::size_t t = 0; t < tgt.length; ++t) {
    const auto prev = step_input(tgt, t);
    StepOutput out = decode_step(g, m, prev, state, enc, false, unused);
    const Tensor& logits = out.logits.value();
    for (std::size_t b = 0; b < tgt.batch; ++b) {
      if (tgt.mask[b * tgt.length + t] == 0.0) continue;
      std::size_t best = 0;
      for (std::size_t j = 1; j < logits.cols(); ++j) {
        if (logits.at(b, j) > logits.at(b, best)) best = j;
      }
      ++acc.total;
      if (static_cast<int>(best) == tgt.at(b, t)) ++acc.correct;
    }
  }
  return acc;
}

}  // namespace clarigen::seq2seq
