#include "clarigen/corpus/synthetic.h"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "clarigen/corpus/batch.h"
#include "clarigen/error.h"

namespace clarigen::corpus {
namespace {

const char* const kQuestionTemplates[] = {
    "what is the {slot} of the {product} ?",
    "can you tell me the {slot} of this {product} ?",
    "is there any info on the {slot} of this {product} ?",
};

const char* const kAnswerTemplates[] = {
    "it is {value} .",
    "the {slot} is {value} .",
};

Tokens fill(const std::string& tmpl, const std::string& product, const std::string& slot,
            const std::string& value) {
  Tokens out;
  std::istringstream in(tmpl);
  std::string w;
  while (in >> w) {
    if (w == "{product}") {
      out.push_back(product);
    } else if (w == "{slot}") {
      out.push_back(slot);
    } else if (w == "{value}") {
      out.push_back(value);
    } else {
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace

const SyntheticLexicon& synthetic_lexicon() {
  static const SyntheticLexicon lex{
      {"blender", "backpack", "lamp", "jacket", "speaker", "kettle"},
      {"color", "size", "material", "power"},
      {
          {"red", "blue", "green", "black", "white", "grey", "yellow", "pink"},
          {"small", "medium", "large", "huge", "tiny", "compact", "bulky", "slim"},
          {"cotton", "steel", "plastic", "leather", "wood", "glass", "bamboo", "nylon"},
          {"battery", "solar", "cord", "usb", "gas", "manual", "crank", "wireless"},
      }};
  return lex;
}

std::vector<SyntheticTriple> generate_synthetic_annotated(std::size_t n, numerics::Rng& rng) {
  if (n == 0) throw ContractError("generate_synthetic: n must be at least 1");
  const auto& lex = synthetic_lexicon();
  const std::size_t k = lex.slots.size();
  std::vector<SyntheticTriple> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticTriple s;
    s.product = rng.index(lex.products.size());
    s.omitted_slot = rng.index(k);
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != s.omitted_slot) order.push_back(j);
    }
    shuffle_indices(order, rng);

    Tokens& c = s.triple.context;
    c = {"the", lex.products[s.product], "has"};
    for (std::size_t j = 0; j < order.size(); ++j) {
      const std::size_t slot = order[j];
      c.push_back(lex.slots[slot]);
      c.push_back(lex.values[slot][rng.index(lex.values[slot].size())]);
      c.push_back(j + 1 == order.size() ? "." : ",");
    }

    const std::string& slot = lex.slots[s.omitted_slot];
    s.answer_value = rng.index(lex.values[s.omitted_slot].size());
    const std::string& value = lex.values[s.omitted_slot][s.answer_value];
    const std::size_t qt = rng.index(std::size(kQuestionTemplates));
    const std::size_t at = rng.index(std::size(kAnswerTemplates));
    s.triple.question = fill(kQuestionTemplates[qt], lex.products[s.product], slot, value);
    s.triple.answer = fill(kAnswerTemplates[at], lex.products[s.product], slot, value);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Triple> generate_synthetic(std::size_t n, numerics::Rng& rng) {
  std::vector<Triple> out;
  for (auto& s : generate_synthetic_annotated(n, rng)) out.push_back(std::move(s.triple));
  return out;
}

std::size_t find_slot(const Tokens& tokens) {
  const auto& slots = synthetic_lexicon().slots;
  for (const std::string& t : tokens) {
    auto it = std::find(slots.begin(), slots.end(), t);
    if (it != slots.end()) return static_cast<std::size_t>(it - slots.begin());
  }
  return slots.size();
}

}  // namespace clarigen::corpus
