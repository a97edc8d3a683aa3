#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "clarigen/corpus/text.h"

namespace clarigen::corpus {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kSos = 2;
inline constexpr int kEos = 3;
inline constexpr int kNumSpecials = 4;

class Vocabulary {
 public:
  // Only the four specials.
  Vocabulary();
  // Specials followed by `tokens` in the given order.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

const std::vector<std::string>& special_tokens();

// Counts tokens over every field; keeps those with frequency >= cutoff,
// ordered by frequency descending then lexicographically.
Vocabulary build_vocab(const std::vector<Triple>& triples, int cutoff = 10);

std::vector<int> encode(const Tokens& tokens, const Vocabulary& vocab, std::size_t max_len,
                        bool append_eos);
// Stops at the first EOS; PAD and SOS are skipped.
Tokens decode(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace clarigen::corpus
