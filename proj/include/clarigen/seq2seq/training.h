#pragma once

#include <functional>
#include <vector>

#include "clarigen/numerics/optimizer.h"
#include "clarigen/seq2seq/model.h"

namespace clarigen::seq2seq {

struct Example {
  std::vector<int> source;
  std::vector<int> target;  // ends with EOS
};

// (context, question) pairs for the question generator.
std::vector<Example> question_examples(const std::vector<corpus::EncodedTriple>& data);
// (context EOS question, answer) pairs for the answer generator.
std::vector<Example> answer_examples(const std::vector<corpus::EncodedTriple>& data);

struct MleTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  numerics::AdamConfig adam;
  std::uint64_t seed = 1;
};

struct MleEpoch {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // per target token
  double held_out_accuracy = 0.0;
};

// Teacher-forced MLE. Shuffling uses fork(1) of the seed and dropout fork(2).
std::vector<MleEpoch> train_mle(const std::vector<Example>& train,
                                const std::vector<Example>& held_out, Seq2Seq& model,
                                const MleTrainConfig& config,
                                const std::function<void(const MleEpoch&)>& on_epoch = {});

// Teacher-forced token accuracy over all examples, batched.
double held_out_accuracy(const Seq2Seq& model, const std::vector<Example>& data,
                         std::size_t batch_size = 64);

}  // namespace clarigen::seq2seq
