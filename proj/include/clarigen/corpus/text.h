#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace clarigen::corpus {

using Tokens = std::vector<std::string>;

inline constexpr std::size_t kMaxContextLen = 100;
inline constexpr std::size_t kMaxQuestionLen = 20;
inline constexpr std::size_t kMaxAnswerLen = 20;

// Raw (context, question, answer) strings as stored in triples.jsonl.
struct TextTriple {
  std::string context;
  std::string question;
  std::string answer;
};

// Preprocessed triple: lowercase tokens, each field truncated to its head.
struct Triple {
  Tokens context;
  Tokens question;
  Tokens answer;

  friend bool operator==(const Triple&, const Triple&) = default;
};

// Lowercases ASCII letters, isolates every ASCII punctuation character as its
// own token and splits on whitespace. Bytes >= 0x80 pass through unchanged.
Tokens preprocess(std::string_view raw);

std::string join(const Tokens& tokens);

// Preprocesses and truncates. Returns false when the context, question or
// answer is empty afterwards (such triples are dropped at ingest).
bool make_triple(const TextTriple& raw, Triple& out);

// "title" and "body" are concatenated with a single space when present.
std::string assemble_context(std::string_view title, std::string_view body);

std::vector<TextTriple> read_text_triples(const std::filesystem::path& path);
void write_text_triples(const std::vector<TextTriple>& triples,
                        const std::filesystem::path& path);

// Token triples are stored in the same JSONL layout with space-joined fields.
std::vector<Triple> read_triples(const std::filesystem::path& path);
void write_triples(const std::vector<Triple>& triples, const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes);
// Deterministic 90/10 split keyed on the context text.
bool is_held_out(const Triple& t);

struct Split {
  std::vector<Triple> train;
  std::vector<Triple> held_out;
};
Split split_by_context(const std::vector<Triple>& triples);

// One line per entry; trailing newline stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path);

}  // namespace clarigen::corpus
