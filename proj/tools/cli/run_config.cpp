#include "run_config.h"

#include <charconv>
#include <cstdlib>

#include "clarigen/corpus/text.h"
#include "clarigen/error.h"

namespace clarigen::cli {
namespace {

enum class Kind { kSize, kReal, kFlag, kText };

struct Key {
  const char* name;
  const char* fallback;
  Kind kind;
  bool fixed = false;  // compiled-in, echoed only
};

const std::vector<Key>& keys() {
  static const std::vector<Key> k{
      {"seed", "1", Kind::kSize},
      {"batch_size", "32", Kind::kSize},
      {"embed_dim", "200", Kind::kSize},
      {"hidden", "100", Kind::kSize},
      {"layers", "2", Kind::kSize},
      {"dropout", "0.5", Kind::kReal},
      {"lr", "1e-4", Kind::kReal},
      {"rl_lr", "1e-4", Kind::kReal},
      {"clip", "5", Kind::kReal},
      {"beam", "5", Kind::kSize},
      {"max_context_len", "100", Kind::kSize, true},
      {"max_question_len", "20", Kind::kSize, true},
      {"max_answer_len", "20", Kind::kSize, true},
      {"vocab_cutoff", "10", Kind::kSize},
      {"delta_decrement", "2", Kind::kSize},
      {"delta_floor", "2", Kind::kSize},
      {"schedule_offset", "0", Kind::kSize},
      {"embeddings", "", Kind::kText},
      {"freeze_embeddings", "false", Kind::kFlag},
      {"utility_hidden", "100", Kind::kSize},
      {"utility_scorer_hidden", "100", Kind::kSize},
      {"utility_lr", "1e-4", Kind::kReal},
      {"negative_ratio", "1", Kind::kSize},
      {"generator_epochs", "10", Kind::kSize},
      {"answer_epochs", "10", Kind::kSize},
      {"utility_epochs", "10", Kind::kSize},
      {"mu_epochs", "10", Kind::kSize},
      {"gan_epochs", "10", Kind::kSize},
      {"gan_init", "generator", Kind::kText},
      {"gen_steps", "1", Kind::kSize},
      {"disc_steps", "1", Kind::kSize},
      {"disc_lr", "1e-4", Kind::kReal},
      {"update_discriminator", "true", Kind::kFlag},
  };
  return k;
}

const Key& lookup(const std::string& name) {
  for (const Key& k : keys()) {
    if (name == k.name) return k;
  }
  throw ContractError("unknown config key '" + name + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool parse_size(const std::string& v, std::size_t& out) {
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && p == end && !v.empty();
}

bool parse_real(const std::string& v, double& out) {
  if (v.empty()) return false;
  char* end = nullptr;
  out = std::strtod(v.c_str(), &end);
  return end == v.c_str() + v.size();
}

void validate(const Key& k, const std::string& v) {
  std::size_t s;
  double d;
  const bool ok = k.kind == Kind::kSize   ? parse_size(v, s)
                  : k.kind == Kind::kReal ? parse_real(v, d)
                  : k.kind == Kind::kFlag ? v == "true" || v == "false"
                                          : true;
  if (!ok) throw ContractError("config key '" + std::string(k.name) + "': bad value '" + v + "'");
}

}  // namespace

RunConfig::RunConfig() {
  for (const Key& k : keys()) values_[k.name] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Key& k = lookup(key);
  validate(k, value);
  if (k.fixed && value != k.fallback) {
    throw ContractError("config key '" + key + "' is fixed at " + k.fallback);
  }
  values_[key] = value;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ContractError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::size_t line_no = 0;
  for (const std::string& raw : corpus::read_lines(path)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string() + ": expected key = value", line_no);
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string RunConfig::str(const std::string& key) const {
  lookup(key);
  return values_.at(key);
}

std::size_t RunConfig::size(const std::string& key) const {
  std::size_t v = 0;
  if (lookup(key).kind != Kind::kSize || !parse_size(values_.at(key), v)) {
    throw ContractError("config key '" + key + "' is not an integer");
  }
  return v;
}

double RunConfig::real(const std::string& key) const {
  double v = 0;
  if (!parse_real(values_.at(lookup(key).name), v)) {
    throw ContractError("config key '" + key + "' is not a number");
  }
  return v;
}

bool RunConfig::flag(const std::string& key) const {
  if (lookup(key).kind != Kind::kFlag) throw ContractError("config key '" + key + "' is not a flag");
  return values_.at(key) == "true";
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const Key& k : keys()) {
    switch (k.kind) {
      case Kind::kSize: j[k.name] = size(k.name); break;
      case Kind::kReal: j[k.name] = real(k.name); break;
      case Kind::kFlag: j[k.name] = flag(k.name); break;
      case Kind::kText: j[k.name] = values_.at(k.name); break;
    }
  }
  return j;
}

std::vector<std::string> RunConfig::overrides() const {
  std::vector<std::string> out;
  for (const Key& k : keys()) {
    double a = 0, b = 0;
    const bool differs = k.kind == Kind::kReal
                             ? parse_real(values_.at(k.name), a) && parse_real(k.fallback, b) && a != b
                             : values_.at(k.name) != k.fallback;
    if (differs) out.push_back(k.name);
  }
  return out;
}

}  // namespace clarigen::cli
