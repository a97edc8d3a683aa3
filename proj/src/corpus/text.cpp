#include "clarigen/corpus/text.h"

#include <fstream>

#include "clarigen/error.h"
#include "json.hpp"

namespace clarigen::corpus {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

Tokens truncated(Tokens t, std::size_t max_len) {
  if (t.size() > max_len) t.resize(max_len);
  return t;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

std::string field(const nlohmann::json& obj, const char* key,
                  const std::filesystem::path& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(path.string() + ": missing string field \"" + key + "\"", line);
  }
  return it->get<std::string>();
}

}  // namespace

Tokens preprocess(std::string_view raw) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

std::string join(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

bool make_triple(const TextTriple& raw, Triple& out) {
  out.context = truncated(preprocess(raw.context), kMaxContextLen);
  out.question = truncated(preprocess(raw.question), kMaxQuestionLen);
  out.answer = truncated(preprocess(raw.answer), kMaxAnswerLen);
  return !out.context.empty() && !out.question.empty() && !out.answer.empty();
}

std::string assemble_context(std::string_view title, std::string_view body) {
  if (title.empty()) return std::string(body);
  if (body.empty()) return std::string(title);
  std::string s(title);
  s.push_back(' ');
  s += body;
  return s;
}

std::vector<TextTriple> read_text_triples(const std::filesystem::path& path) {
  std::vector<TextTriple> out;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError(path.string() + ": expected an object", line_no);
    out.push_back({field(obj, "context", path, line_no), field(obj, "question", path, line_no),
                   field(obj, "answer", path, line_no)});
  }
  return out;
}

void write_text_triples(const std::vector<TextTriple>& triples,
                        const std::filesystem::path& path) {
  auto f = open_out(path);
  for (const TextTriple& t : triples) {
    nlohmann::ordered_json obj;
    obj["context"] = t.context;
    obj["question"] = t.question;
    obj["answer"] = t.answer;
    f << obj.dump() << '\n';
  }
  if (!f) throw IoError("failed writing " + path.string());
}

std::vector<Triple> read_triples(const std::filesystem::path& path) {
  std::vector<Triple> out;
  for (const TextTriple& raw : read_text_triples(path)) {
    Triple t;
    if (make_triple(raw, t)) out.push_back(std::move(t));
  }
  return out;
}

void write_triples(const std::vector<Triple>& triples, const std::filesystem::path& path) {
  std::vector<TextTriple> raw;
  raw.reserve(triples.size());
  for (const Triple& t : triples) {
    raw.push_back({join(t.context), join(t.question), join(t.answer)});
  }
  write_text_triples(raw, path);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_held_out(const Triple& t) { return fnv1a(join(t.context)) % 10 == 0; }

Split split_by_context(const std::vector<Triple>& triples) {
  Split s;
  for (const Triple& t : triples) (is_held_out(t) ? s.held_out : s.train).push_back(t);
  return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
  auto f = open_out(path);
  for (const std::string& l : lines) f << l << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace clarigen::corpus
