#pragma once

#include <vector>

#include "clarigen/corpus/vocab.h"
#include "clarigen/numerics/rng.h"

namespace clarigen::corpus {

struct EncodedTriple {
  std::vector<int> context;   // no EOS
  std::vector<int> question;  // ends with EOS
  std::vector<int> answer;    // ends with EOS
};

EncodedTriple encode_triple(const Triple& t, const Vocabulary& vocab);
std::vector<EncodedTriple> encode_all(const std::vector<Triple>& triples,
                                      const Vocabulary& vocab);

// B x L id matrix padded with PAD, row-major.
struct Sequences {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;
  std::vector<int> lengths;
  std::vector<double> mask;

  int at(std::size_t b, std::size_t t) const { return ids[b * length + t]; }
  std::vector<int> row(std::size_t b) const;
  // Column t across the batch.
  std::vector<int> step(std::size_t t) const;
  std::vector<double> step_mask(std::size_t t) const;
};

Sequences pad_sequences(const std::vector<std::vector<int>>& seqs);

struct Batch {
  std::vector<std::size_t> index;  // positions in the source list
  Sequences context;
  Sequences question;
  Sequences answer;

  std::size_t size() const { return index.size(); }
};

Batch make_batch(const std::vector<EncodedTriple>& data, const std::vector<std::size_t>& index);

// Shuffles with rng (Fisher-Yates), then cuts into batches of batch_size; the
// last batch holds the remainder.
std::vector<Batch> make_batches(const std::vector<EncodedTriple>& data, std::size_t batch_size,
                                numerics::Rng& rng);

void shuffle_indices(std::vector<std::size_t>& v, numerics::Rng& rng);

}  // namespace clarigen::corpus
