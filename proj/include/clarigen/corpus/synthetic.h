#pragma once

#include <string>
#include <vector>

#include "clarigen/corpus/text.h"
#include "clarigen/numerics/rng.h"

namespace clarigen::corpus {

// Product-description world used for desk-scale runs. A context lists every
// attribute slot of a product except one; the question asks about the missing
// slot and the answer names a value for it.
struct SyntheticLexicon {
  std::vector<std::string> products;
  std::vector<std::string> slots;
  std::vector<std::vector<std::string>> values;  // per slot, disjoint
};

const SyntheticLexicon& synthetic_lexicon();

struct SyntheticTriple {
  Triple triple;
  std::size_t product = 0;
  std::size_t omitted_slot = 0;
  std::size_t answer_value = 0;
};

std::vector<SyntheticTriple> generate_synthetic_annotated(std::size_t n, numerics::Rng& rng);
std::vector<Triple> generate_synthetic(std::size_t n, numerics::Rng& rng);

// Index of the first slot name occurring in `tokens`, or slots.size() if none.
std::size_t find_slot(const Tokens& tokens);

}  // namespace clarigen::corpus
