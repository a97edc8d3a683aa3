#pragma once

#include <filesystem>

#include "clarigen/corpus/vocab.h"
#include "clarigen/numerics/rng.h"
#include "clarigen/numerics/tensor.h"

namespace clarigen::corpus {

inline constexpr std::size_t kEmbeddingDim = 200;

struct EmbeddingTable {
  numerics::Tensor matrix;  // |V| x d
  bool trainable = true;
};

// uniform(-0.1, 0.1) rows, PAD row zero.
EmbeddingTable random_embeddings(std::size_t vocab_size, std::size_t dim, numerics::Rng& rng);

// Reads whitespace-separated "token v1 ... vd" rows. Vocabulary tokens found in
// the file take the file row; the others keep their random init. PAD is zero.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::size_t dim, numerics::Rng& rng);

}  // namespace clarigen::corpus
