#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/commands.h"
#include "clarigen/corpus/text.h"
#include "doctest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = clarigen::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "clarigen_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

const char* const kTinyConfig =
    "embed_dim = 4\nhidden = 4\nlayers = 1\ndropout = 0\nutility_hidden = 4\n"
    "utility_scorer_hidden = 4\ngenerator_epochs = 1\nanswer_epochs = 1\nutility_epochs = 1\n"
    "mu_epochs = 1\ngan_epochs = 1\nvocab_cutoff = 1\n";

// A run directory holding data, vocabulary and generator checkpoint.
struct TinyRun {
  fs::path dir, conf;

  std::vector<std::string> with(std::vector<std::string> args) const {
    args.insert(args.end(), {"--run-dir", dir.string(), "--config", conf.string()});
    return args;
  }
};

TinyRun tiny_run(const std::string& name, std::size_t n = 60) {
  TinyRun r{scratch(name), {}};
  r.conf = r.dir / "tiny.conf";
  write_file(r.conf, kTinyConfig);
  REQUIRE(run(r.with({"synth-data", "--n", std::to_string(n), "--out", (r.dir / "raw.jsonl").string()})).code == 0);
  REQUIRE(run(r.with({"ingest", "--input", (r.dir / "raw.jsonl").string()})).code == 0);
  REQUIRE(run(r.with({"pretrain", "--role", "generator"})).code == 0);
  return r;
}

json error_line(const Result& r) { return json::parse(r.err); }

}  // namespace

TEST_CASE("cli: exit codes for help, usage, contract and io errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"no-such-command"}).code == 1);
  CHECK(run({"pretrain", "--role", "critic"}).code == 1);

  const auto dir = scratch("codes");
  const Result bad_key = run({"synth-data", "--n", "5", "--out", (dir / "x.jsonl").string(), "--run-dir",
                              dir.string(), "--set", "no_such_key=1"});
  CHECK(bad_key.code == 1);
  CHECK(error_line(bad_key).at("kind") == "contract");

  const Result fixed = run({"synth-data", "--n", "5", "--out", (dir / "x.jsonl").string(), "--run-dir",
                            dir.string(), "--set", "max_question_len=30"});
  CHECK(fixed.code == 1);

  const Result missing = run({"ingest", "--input", (dir / "absent.jsonl").string(), "--run-dir", dir.string()});
  CHECK(missing.code == 2);
  CHECK(error_line(missing).at("kind") == "io");
}

TEST_CASE("cli: training before pretraining names the missing step") {
  const auto r = tiny_run("gan_without_utility");
  const Result res = run(r.with({"train", "--stage", "gan"}));
  CHECK(res.code == 2);
  const std::string msg = error_line(res).at("message");
  CHECK(msg.find("checkpoints") != std::string::npos);
  CHECK(msg.find("clarigen pretrain --role") != std::string::npos);
}

TEST_CASE("cli: first log line echoes the effective config and the overrides") {
  const auto dir = scratch("echo");
  const Result res = run({"synth-data", "--n", "3", "--out", (dir / "x.jsonl").string(), "--run-dir", dir.string(),
                          "--set", "seed=7", "--set", "lr=0.0001"});
  REQUIRE(res.code == 0);
  std::istringstream lines(res.out);
  std::string first;
  std::getline(lines, first);
  const json j = json::parse(first);
  CHECK(j.at("event") == "config");
  CHECK(j.at("command") == "synth-data");
  CHECK(j.at("config").at("seed") == 7);
  CHECK(j.at("config").at("embed_dim") == 200);
  CHECK(j.at("overrides") == json::array({"seed"}));
  CHECK(read_file(dir / "logs" / "synth-data.jsonl").substr(0, first.size()) == first);
}

TEST_CASE("cli: generate on empty input writes an empty file; beam=1 matches greedy") {
  const auto r = tiny_run("generate");
  const auto ckpt = (r.dir / "checkpoints" / "generator.ckpt").string();
  write_file(r.dir / "empty.txt", "");
  REQUIRE(run(r.with({"generate", "--checkpoint", ckpt, "--input", (r.dir / "empty.txt").string(), "--output",
                      (r.dir / "empty_out.txt").string()}))
              .code == 0);
  CHECK(fs::exists(r.dir / "empty_out.txt"));
  CHECK(read_file(r.dir / "empty_out.txt").empty());

  write_file(r.dir / "ctx.txt", "the lamp has color red , size small , power usb .\nthe kettle has material steel .\n");
  auto gen = [&](const std::string& mode, const std::string& out) {
    auto args = r.with({"generate", "--checkpoint", ckpt, "--input", (r.dir / "ctx.txt").string(), "--output",
                        (r.dir / out).string(), "--mode", mode, "--set", "beam=1"});
    REQUIRE(run(args).code == 0);
    return read_file(r.dir / out);
  };
  const std::string greedy = gen("greedy", "greedy.txt");
  CHECK(std::count(greedy.begin(), greedy.end(), '\n') == 2);
  CHECK(greedy == gen("beam", "beam.txt"));
}

TEST_CASE("cli: evaluate reports misaligned files by line") {
  const auto dir = scratch("evaluate");
  write_file(dir / "refs.txt", "what color ?\nhow big ?\nwhat material ?\n");
  write_file(dir / "sys.txt", "what color ?\nhow big ?\n");
  const Result res = run({"evaluate", "--references", (dir / "refs.txt").string(), "--system",
                          "mle=" + (dir / "sys.txt").string(), "--run-dir", dir.string()});
  CHECK(res.code == 1);
  const std::string msg = error_line(res).at("message");
  CHECK(msg.find("'mle' has 2 lines") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);

  write_file(dir / "sys.txt", "what color ?\nhow big ?\nwhat is it ?\n");
  const Result ok = run({"evaluate", "--references", (dir / "refs.txt").string(), "--system",
                         "mle=" + (dir / "sys.txt").string(), "--run-dir", dir.string()});
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "reports" / "evaluation.txt"));
  CHECK(fs::exists(dir / "reports" / "evaluation.json"));
}

TEST_CASE("cli: a checkpoint from another vocabulary is rejected") {
  const auto a = tiny_run("vocab_a", 60);
  const auto b = tiny_run("vocab_b", 200);
  write_file(b.dir / "ctx.txt", "the lamp has color red .\n");
  const Result res = run(b.with({"generate", "--checkpoint", (a.dir / "checkpoints" / "generator.ckpt").string(),
                                 "--input", (b.dir / "ctx.txt").string(), "--output", (b.dir / "o.txt").string()}));
  CHECK(res.code == 1);
  CHECK(std::string(error_line(res).at("message")).find("vocabulary mismatch") != std::string::npos);
}
