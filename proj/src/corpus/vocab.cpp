#include "clarigen/corpus/vocab.h"

#include <algorithm>
#include <map>

#include "clarigen/error.h"

namespace clarigen::corpus {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> s{"<pad>", "<unk>", "<s>", "</s>"};
  return s;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = special_tokens();
  tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ContractError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const { write_lines(tokens_, path); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  const auto& specials = special_tokens();
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (i >= lines.size() || lines[i] != specials[i]) {
      throw ParseError(path.string() + ": expected special token " + specials[i], i + 1);
    }
  }
  for (std::size_t i = specials.size(); i < lines.size(); ++i) {
    if (lines[i].empty()) throw ParseError(path.string() + ": empty token", i + 1);
  }
  return Vocabulary(std::vector<std::string>(lines.begin() + kNumSpecials, lines.end()));
}

Vocabulary build_vocab(const std::vector<Triple>& triples, int cutoff) {
  if (triples.empty()) throw ContractError("build_vocab: empty triple stream");
  std::map<std::string, long> counts;
  for (const Triple& t : triples) {
    for (const Tokens* f : {&t.context, &t.question, &t.answer}) {
      for (const std::string& tok : *f) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= cutoff && std::find(special_tokens().begin(), special_tokens().end(), tok) ==
                           special_tokens().end()) {
      kept.emplace_back(tok, n);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary(tokens);
}

std::vector<int> encode(const Tokens& tokens, const Vocabulary& vocab, std::size_t max_len,
                        bool append_eos) {
  if (max_len == 0) throw ContractError("encode: max_len must be at least 1");
  const std::size_t keep = std::min(tokens.size(), append_eos ? max_len - 1 : max_len);
  std::vector<int> ids;
  ids.reserve(keep + 1);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(vocab.id(tokens[i]));
  if (append_eos) ids.push_back(kEos);
  return ids;
}

Tokens decode(const std::vector<int>& ids, const Vocabulary& vocab) {
  Tokens out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kSos) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace clarigen::corpus
