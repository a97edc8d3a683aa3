#pragma once

#include <optional>
#include <vector>

#include "clarigen/corpus/batch.h"
#include "clarigen/seq2seq/lstm.h"

namespace clarigen::seq2seq {

using corpus::Sequences;
using numerics::Rng;
using numerics::Tensor;

inline constexpr std::size_t kMaxDecodeLen = 20;

struct Seq2SeqConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 200;
  std::size_t hidden = 100;
  std::size_t layers = 2;
  double dropout = 0.5;
  bool freeze_embeddings = false;
};

// Attention encoder-decoder. Weight matrices use the (input x output) layout:
// W_a hidden x hidden, W_c 2·hidden x hidden, W_s hidden x |V| plus an output
// bias b_s.
class Seq2Seq {
 public:
  Seq2Seq(const Seq2SeqConfig& config, Rng& init, const Tensor* embeddings = nullptr);

  const Seq2SeqConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  ParamId embedding() const { return embedding_; }
  const std::vector<LstmLayer>& encoder() const { return encoder_; }
  const std::vector<LstmLayer>& decoder() const { return decoder_; }
  ParamId w_a() const { return w_a_; }
  ParamId w_c() const { return w_c_; }
  ParamId w_s() const { return w_s_; }
  ParamId b_s() const { return b_s_; }

 private:
  Seq2SeqConfig config_;
  ParameterSet params_;
  ParamId embedding_;
  std::vector<LstmLayer> encoder_;
  std::vector<LstmLayer> decoder_;
  ParamId w_a_, w_c_, w_s_, b_s_;
};

// Embedding rows for a step of token ids; the table enters as a constant when
// embeddings are frozen.
Expr embed(Graph& g, Seq2Seq& model, std::span<const int> ids);

struct EncoderOutput {
  std::optional<Expr> states;  // B x N x H top-layer outputs, absent when N == 0
  std::vector<double> mask;    // B*N
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<LstmState> final;  // per layer
};

EncoderOutput encode(Graph& g, Seq2Seq& model, const Sequences& src, bool train, Rng& rng);

struct Attention {
  Expr context;  // B x H
  Expr weights;  // B x N
};

// a_n ∝ exp(h_t·W_a·h_n) over unmasked positions; context = Σ a_n h_n.
Attention attend(Graph& g, Seq2Seq& model, Expr h_t, const EncoderOutput& enc);

struct StepOutput {
  Expr logits;   // B x V
  Expr h_tilde;  // B x H
  Attention attention;
};

// One decoder step: states are advanced in place for rows where active is
// true (all rows when active is empty).
StepOutput decode_step(Graph& g, Seq2Seq& model, std::span<const int> prev,
                       std::vector<LstmState>& state, const EncoderOutput& enc, bool train,
                       Rng& rng, const std::vector<bool>& active = {});

// Tokens a decoder may emit: everything except PAD and SOS.
std::vector<bool> emittable(std::size_t vocab_size);

struct MixedDecode {
  // Teacher-forced negative log-likelihood over steps < delta (scalar).
  Expr mle;
  bool has_mle = false;
  // Predicted question per row: gold prefix followed by the sampled suffix.
  std::vector<std::vector<int>> predicted;
  // Number of sampled tokens per row.
  std::vector<std::size_t> suffix_length;
  // Σ over sampled steps of log p(token) per row, B x 1 (present iff any row
  // sampled at least one token).
  std::optional<Expr> suffix_log_prob;
};

// Teacher-forces the first delta steps and samples the remaining ones up to
// max_len, feeding the model its own samples.
MixedDecode mixed_decode(Graph& g, Seq2Seq& model, const Sequences& src, const Sequences& tgt,
                         std::size_t delta, std::size_t max_len, bool train, Rng& dropout_rng,
                         Rng& sample_rng);

// Σ_t −log p(tgt_t | tgt_<t, src) over unmasked target positions.
Expr mle_loss(Graph& g, Seq2Seq& model, const Sequences& src, const Sequences& tgt, bool train,
              Rng& rng);

// Input of the answer generator: context, EOS, then the question without its
// trailing EOS.
std::vector<int> answer_input(const std::vector<int>& context, const std::vector<int>& question);

struct TokenAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

// Teacher-forced argmax accuracy on unmasked target positions (inference mode).
TokenAccuracy teacher_forced_accuracy(const Seq2Seq& model, const Sequences& src,
                                      const Sequences& tgt);

}  // namespace clarigen::seq2seq
