#include "commands.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "clarigen/corpus/batch.h"
#include "clarigen/corpus/embeddings.h"
#include "clarigen/corpus/synthetic.h"
#include "clarigen/error.h"
#include "clarigen/gan/gan.h"
#include "clarigen/metrics/metrics.h"
#include "clarigen/mixer/mixer.h"
#include "clarigen/numerics/checkpoint.h"
#include "clarigen/retrieval/retrieval.h"
#include "clarigen/seq2seq/decoding.h"
#include "clarigen/seq2seq/training.h"
#include "clarigen/utility/utility.h"
#include "json.hpp"
#include "run_config.h"

namespace clarigen::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using corpus::Tokens;
using corpus::Vocabulary;
using numerics::Rng;
using seq2seq::Seq2Seq;
using utility::Utility;

struct Paths {
  fs::path root;
  fs::path data() const { return root / "data"; }
  fs::path train() const { return data() / "train.jsonl"; }
  fs::path held_out() const { return data() / "held_out.jsonl"; }
  fs::path vocab() const { return data() / "vocab.txt"; }
  fs::path checkpoint(const std::string& name) const { return root / "checkpoints" / (name + ".ckpt"); }
  fs::path log(const std::string& name) const { return root / "logs" / (name + ".jsonl"); }
  fs::path report(const std::string& name) const { return root / "reports" / name; }
};

fs::path sidecar(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".json"); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

class Log {
 public:
  Log(const fs::path& path, std::ostream& echo) : echo_(echo) {
    ensure_parent(path);
    file_.open(path, std::ios::trunc);
    if (!file_) throw IoError("cannot write log " + path.string());
  }
  void emit(const json& j) {
    const std::string line = j.dump();
    file_ << line << '\n';
    echo_ << line << '\n';
  }

 private:
  std::ofstream file_;
  std::ostream& echo_;
};

struct Common {
  std::string run_dir = "run";
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--run-dir", c.run_dir, "Directory holding data, checkpoints, logs and reports")
      ->capture_default_str();
  sub->add_option("--config", c.config_file, "Flat key = value config file");
  sub->add_option("--set", c.overrides, "Config override key=value (repeatable)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return cfg;
}

json config_event(const std::string& command, const RunConfig& cfg) {
  json j;
  j["event"] = "config";
  j["command"] = command;
  j["config"] = cfg.to_json();
  j["overrides"] = cfg.overrides();
  return j;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t vocab_hash(const Vocabulary& v) {
  std::string all;
  for (const auto& t : v.tokens()) all += t + '\n';
  return corpus::fnv1a(all);
}

void require_file(const fs::path& p, const std::string& what, const std::string& remedy) {
  if (!fs::exists(p)) {
    throw IoError("missing " + what + " " + p.string() + "; run `clarigen " + remedy + "` first");
  }
}

Vocabulary load_vocab(const Paths& paths) {
  require_file(paths.vocab(), "vocabulary", "ingest");
  return Vocabulary::load(paths.vocab());
}

std::vector<corpus::EncodedTriple> load_split(const fs::path& p, const Vocabulary& vocab) {
  require_file(p, "data split", "ingest");
  return corpus::encode_all(corpus::read_triples(p), vocab);
}

numerics::AdamConfig adam(const RunConfig& cfg, const std::string& lr_key) {
  numerics::AdamConfig a;
  a.learning_rate = cfg.real(lr_key);
  a.clip_norm = cfg.real("clip");
  return a;
}

void write_sidecar(const fs::path& checkpoint, const std::string& role, const json& model,
                   const Vocabulary& vocab, const RunConfig& cfg) {
  json j;
  j["role"] = role;
  j["model"] = model;
  j["vocab_size"] = vocab.size();
  j["vocab_hash"] = hex(vocab_hash(vocab));
  j["config"] = cfg.to_json();
  std::ofstream f(sidecar(checkpoint), std::ios::trunc);
  if (!f) throw IoError("cannot write " + sidecar(checkpoint).string());
  f << j.dump(2) << '\n';
}

json read_sidecar(const fs::path& checkpoint, const std::string& what, const std::string& remedy,
                  const Vocabulary& vocab) {
  require_file(checkpoint, what, remedy);
  const fs::path s = sidecar(checkpoint);
  std::ifstream f(s);
  if (!f) throw IoError("missing checkpoint metadata " + s.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(s.string() + ": " + e.what());
  }
  if (j.value("vocab_size", std::size_t{0}) != vocab.size() ||
      j.value("vocab_hash", std::string()) != hex(vocab_hash(vocab))) {
    throw ContractError("vocabulary mismatch: " + checkpoint.string() + " was trained with " +
                        std::to_string(j.value("vocab_size", std::size_t{0})) +
                        " tokens, the current vocabulary has " + std::to_string(vocab.size()));
  }
  return j;
}

void save(const numerics::ParameterSet& params, const fs::path& p) {
  ensure_parent(p);
  numerics::save_checkpoint(params, p);
}

json seq2seq_json(const seq2seq::Seq2SeqConfig& c) {
  json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["dropout"] = c.dropout;
  j["freeze_embeddings"] = c.freeze_embeddings;
  return j;
}

json utility_json(const utility::UtilityConfig& c) {
  json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["scorer_hidden"] = c.scorer_hidden;
  return j;
}

Seq2Seq load_seq2seq(const fs::path& p, const std::string& what, const std::string& remedy,
                     const Vocabulary& vocab) {
  const json meta = read_sidecar(p, what, remedy, vocab);
  if (meta.value("role", std::string()) == "utility") {
    throw ContractError(p.string() + " holds a utility model, expected a sequence model");
  }
  const json& m = meta.at("model");
  seq2seq::Seq2SeqConfig c;
  c.vocab_size = m.at("vocab_size");
  c.embed_dim = m.at("embed_dim");
  c.hidden = m.at("hidden");
  c.layers = m.at("layers");
  c.dropout = m.at("dropout");
  c.freeze_embeddings = m.at("freeze_embeddings");
  Rng unused(0);
  Seq2Seq model(c, unused);
  numerics::load_checkpoint(model.params(), p);
  return model;
}

Utility load_utility(const fs::path& p, const std::string& what, const std::string& remedy,
                     const Vocabulary& vocab) {
  const json meta = read_sidecar(p, what, remedy, vocab);
  if (meta.value("role", std::string()) != "utility") {
    throw ContractError(p.string() + " does not hold a utility model");
  }
  const json& m = meta.at("model");
  utility::UtilityConfig c;
  c.vocab_size = m.at("vocab_size");
  c.embed_dim = m.at("embed_dim");
  c.hidden = m.at("hidden");
  c.scorer_hidden = m.at("scorer_hidden");
  Rng unused(0);
  Utility u(c, unused);
  numerics::load_checkpoint(u.params(), p);
  return u;
}

// ---- subcommands ----

void cmd_synth(const Paths& paths, const RunConfig& cfg, std::size_t n, const fs::path& out,
               std::ostream& echo) {
  Log log(paths.log("synth-data"), echo);
  log.emit(config_event("synth-data", cfg));
  Rng rng(cfg.size("seed"));
  std::vector<corpus::TextTriple> raw;
  for (const auto& t : corpus::generate_synthetic(n, rng)) {
    raw.push_back({corpus::join(t.context), corpus::join(t.question), corpus::join(t.answer)});
  }
  ensure_parent(out);
  corpus::write_text_triples(raw, out);
  log.emit({{"event", "done"}, {"output", out.string()}, {"triples", raw.size()}});
}

void cmd_ingest(const Paths& paths, const RunConfig& cfg, const fs::path& input,
                std::ostream& echo) {
  Log log(paths.log("ingest"), echo);
  log.emit(config_event("ingest", cfg));
  const auto raw = corpus::read_text_triples(input);
  std::vector<corpus::Triple> kept;
  for (const auto& r : raw) {
    corpus::Triple t;
    if (corpus::make_triple(r, t)) kept.push_back(std::move(t));
  }
  if (kept.empty()) throw ContractError("ingest: no usable triples in " + input.string());
  const auto split = corpus::split_by_context(kept);
  const Vocabulary vocab =
      corpus::build_vocab(split.train, static_cast<int>(cfg.size("vocab_cutoff")));
  fs::create_directories(paths.data());
  corpus::write_triples(split.train, paths.train());
  corpus::write_triples(split.held_out, paths.held_out());
  vocab.save(paths.vocab());
  log.emit({{"event", "done"},
            {"read", raw.size()},
            {"dropped", raw.size() - kept.size()},
            {"train", split.train.size()},
            {"held_out", split.held_out.size()},
            {"vocab_size", vocab.size()}});
}

void pretrain_seq2seq(const Paths& paths, const RunConfig& cfg, const std::string& role,
                      Log& log) {
  const Vocabulary vocab = load_vocab(paths);
  const auto train = load_split(paths.train(), vocab);
  const auto held_out = load_split(paths.held_out(), vocab);
  const bool is_gen = role == "generator";

  Rng init(numerics::mix_seed(cfg.size("seed"), is_gen ? 101 : 102));
  seq2seq::Seq2SeqConfig mc{vocab.size(),      cfg.size("embed_dim"), cfg.size("hidden"),
                            cfg.size("layers"), cfg.real("dropout"),   cfg.flag("freeze_embeddings")};
  std::optional<corpus::EmbeddingTable> table;
  if (!cfg.str("embeddings").empty()) {
    table = corpus::load_embeddings(cfg.str("embeddings"), vocab, mc.embed_dim, init);
  }
  Seq2Seq model(mc, init, table ? &table->matrix : nullptr);

  seq2seq::MleTrainConfig tc{cfg.size(is_gen ? "generator_epochs" : "answer_epochs"),
                             cfg.size("batch_size"), adam(cfg, "lr"), cfg.size("seed")};
  const auto tr = is_gen ? seq2seq::question_examples(train) : seq2seq::answer_examples(train);
  const auto ho = is_gen ? seq2seq::question_examples(held_out) : seq2seq::answer_examples(held_out);
  log.emit({{"event", "start"},
            {"train", tr.size()},
            {"held_out", ho.size()},
            {"held_out_accuracy", seq2seq::held_out_accuracy(model, ho)}});
  seq2seq::train_mle(tr, ho, model, tc, [&](const seq2seq::MleEpoch& e) {
    log.emit({{"event", "epoch"},
              {"epoch", e.epoch},
              {"loss", e.mean_loss},
              {"held_out_accuracy", e.held_out_accuracy}});
  });
  const fs::path out = paths.checkpoint(role == "generator" ? "generator" : "answer");
  save(model.params(), out);
  write_sidecar(out, role, seq2seq_json(mc), vocab, cfg);
  log.emit({{"event", "done"}, {"checkpoint", out.string()}, {"checksum", hex(model.params().checksum())}});
}

void pretrain_utility(const Paths& paths, const RunConfig& cfg, Log& log) {
  const Vocabulary vocab = load_vocab(paths);
  const auto train = load_split(paths.train(), vocab);
  Rng init(numerics::mix_seed(cfg.size("seed"), 103));
  utility::UtilityConfig uc{vocab.size(), cfg.size("embed_dim"), cfg.size("utility_hidden"),
                            cfg.size("utility_scorer_hidden")};
  Utility util(uc, init);
  Rng neg(numerics::mix_seed(cfg.size("seed"), 104));
  const auto labeled = utility::make_negatives(train, neg, cfg.size("negative_ratio"));
  utility::UtilityTrainConfig tc{cfg.size("utility_epochs"), cfg.size("batch_size"),
                                 adam(cfg, "utility_lr"), cfg.size("seed")};
  const auto report = utility::pretrain_utility(labeled, util, tc);
  log.emit({{"event", "start"},
            {"train", report.train_size},
            {"held_out", report.held_out_size},
            {"loss", report.initial_loss}});
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    log.emit({{"event", "epoch"},
              {"epoch", e},
              {"loss", report.epoch_loss[e]},
              {"held_out_accuracy", report.held_out_accuracy[e]}});
  }
  const fs::path out = paths.checkpoint("utility");
  save(util.params(), out);
  write_sidecar(out, "utility", utility_json(uc), vocab, cfg);
  log.emit({{"event", "done"}, {"checkpoint", out.string()}, {"checksum", hex(util.params().checksum())}});
}

void cmd_pretrain(const Paths& paths, const RunConfig& cfg, const std::string& role,
                  std::ostream& echo) {
  Log log(paths.log("pretrain-" + role), echo);
  json c = config_event("pretrain", cfg);
  c["role"] = role;
  log.emit(c);
  if (role == "utility") {
    pretrain_utility(paths, cfg, log);
  } else {
    pretrain_seq2seq(paths, cfg, role, log);
  }
}

mixer::MixerSchedule schedule(const RunConfig& cfg) {
  mixer::MixerSchedule s;
  s.max_len = cfg.size("max_question_len");
  s.decrement = cfg.size("delta_decrement");
  s.floor = cfg.size("delta_floor");
  return s;
}

void cmd_train(const Paths& paths, const RunConfig& cfg, const std::string& stage,
               std::ostream& echo) {
  const std::string name = stage == "gan" ? "gan" : "max_utility";
  Log log(paths.log("train-" + stage), echo);
  json c = config_event("train", cfg);
  c["stage"] = stage;
  log.emit(c);

  const Vocabulary vocab = load_vocab(paths);
  const auto train = load_split(paths.train(), vocab);
  const auto held_out = load_split(paths.held_out(), vocab);
  std::string init_name = "generator";
  std::string init_remedy = "pretrain --role generator";
  if (stage == "gan") {
    const std::string gi = cfg.str("gan_init");
    if (gi == "max-utility") {
      init_name = "max_utility";
      init_remedy = "train --stage max-utility";
    } else if (gi != "generator") {
      throw ContractError("gan_init must be 'generator' or 'max-utility', got '" + gi + "'");
    }
  }
  Seq2Seq gen = load_seq2seq(paths.checkpoint(init_name), init_name + " checkpoint", init_remedy, vocab);
  const Seq2Seq answer_gen = load_seq2seq(paths.checkpoint("answer"), "answer generator checkpoint",
                                          "pretrain --role answer", vocab);
  const Utility util = load_utility(paths.checkpoint("utility"), "utility checkpoint",
                                    "pretrain --role utility", vocab);
  const mixer::RewardFn reward = mixer::utility_reward(answer_gen, util);
  const std::uint64_t answer_before = answer_gen.params().checksum();
  const fs::path out = paths.checkpoint(name);

  if (stage == "max-utility") {
    mixer::MaxUtilityConfig mc;
    mc.schedule = schedule(cfg);
    mc.epochs = cfg.size("mu_epochs");
    mc.start_epoch = cfg.size("schedule_offset");
    mc.batch_size = cfg.size("batch_size");
    mc.steps_per_batch = cfg.size("gen_steps");
    mc.adam = adam(cfg, "rl_lr");
    mc.seed = cfg.size("seed");
    mixer::MaxUtilityHooks hooks;
    hooks.after_epoch = [&](const mixer::MaxUtilityEpoch& e) {
      log.emit({{"event", "epoch"},
                {"epoch", e.epoch},
                {"delta", e.delta},
                {"loss", e.mean_loss},
                {"train_reward", e.mean_train_reward},
                {"held_out_reward", e.held_out_reward}});
    };
    log.emit({{"event", "start"},
              {"train", train.size()},
              {"held_out", held_out.size()},
              {"held_out_reward", mixer::mean_greedy_reward(gen, held_out, reward)}});
    mixer::train_max_utility(train, held_out, gen, reward, reward, mc, hooks);
  } else {
    gan::GanConfig gc;
    gc.epochs = cfg.size("gan_epochs");
    gc.start_epoch = cfg.size("schedule_offset") + (init_name == "max_utility" ? cfg.size("mu_epochs") : 0);
    gc.batch_size = cfg.size("batch_size");
    gc.gen_steps_per_round = cfg.size("gen_steps");
    gc.disc_steps_per_round = cfg.size("disc_steps");
    gc.update_discriminator = cfg.flag("update_discriminator");
    gc.beam = cfg.size("beam");
    gc.schedule = schedule(cfg);
    gc.gen_adam = adam(cfg, "rl_lr");
    gc.disc_adam = adam(cfg, "disc_lr");
    gc.seed = cfg.size("seed");
    Utility disc = util;
    gan::train_gan(train, held_out, gen, answer_gen, disc, util, gc, [&](const gan::GanRoundReport& r) {
      log.emit({{"event", "round"},
                {"round", r.round},
                {"delta", r.delta},
                {"generator_loss", r.generator_loss},
                {"generator_reward", r.generator_reward},
                {"discriminator_loss", r.discriminator_loss},
                {"probe_accuracy", r.probe_accuracy},
                {"probe_score", r.probe_score},
                {"live_probe_score", r.live_probe_score},
                {"held_out_reward", r.held_out_reward}});
    });
    const fs::path disc_out = paths.checkpoint("gan_discriminator");
    save(disc.params(), disc_out);
    write_sidecar(disc_out, "utility", utility_json(disc.config()), vocab, cfg);
  }
  save(gen.params(), out);
  write_sidecar(out, "generator", seq2seq_json(gen.config()), vocab, cfg);
  log.emit({{"event", "done"},
            {"checkpoint", out.string()},
            {"checksum", hex(gen.params().checksum())},
            {"answer_checksum_before", hex(answer_before)},
            {"answer_checksum_after", hex(answer_gen.params().checksum())}});
}

std::vector<int> encode_context(const std::string& line, const Vocabulary& vocab) {
  return corpus::encode(corpus::preprocess(line), vocab, corpus::kMaxContextLen, false);
}

void cmd_generate(const Paths& paths, const RunConfig& cfg, const fs::path& checkpoint,
                  const fs::path& input, const fs::path& output, const std::string& mode,
                  std::ostream& echo) {
  Log log(paths.log("generate"), echo);
  json c = config_event("generate", cfg);
  c["checkpoint"] = checkpoint.string();
  c["mode"] = mode;
  log.emit(c);
  if (mode != "greedy" && mode != "beam") throw ContractError("mode must be greedy or beam");
  const Vocabulary vocab = load_vocab(paths);
  const Seq2Seq model = load_seq2seq(checkpoint, "generator checkpoint", "pretrain --role generator", vocab);
  const std::size_t max_len = cfg.size("max_question_len");
  std::vector<std::string> out;
  for (const std::string& line : corpus::read_lines(input)) {
    const auto src = encode_context(line, vocab);
    const auto d = mode == "greedy" ? seq2seq::greedy_decode(model, src, max_len)
                                    : seq2seq::beam_search(model, src, cfg.size("beam"), max_len);
    out.push_back(corpus::join(corpus::decode(d.ids, vocab)));
  }
  ensure_parent(output);
  corpus::write_lines(out, output);
  log.emit({{"event", "done"}, {"output", output.string()}, {"lines", out.size()}});
}

std::vector<Tokens> read_outputs(const fs::path& p) {
  std::vector<Tokens> out;
  for (const auto& line : corpus::read_lines(p)) out.push_back(corpus::preprocess(line));
  return out;
}

std::vector<std::vector<Tokens>> read_references(const fs::path& p) {
  std::vector<std::vector<Tokens>> out;
  std::size_t line_no = 0;
  for (const auto& line : corpus::read_lines(p)) {
    ++line_no;
    std::vector<Tokens> refs;
    std::size_t start = 0;
    while (true) {
      const auto sep = line.find("|||", start);
      refs.push_back(corpus::preprocess(line.substr(start, sep == std::string::npos ? sep : sep - start)));
      if (sep == std::string::npos) break;
      start = sep + 3;
    }
    if (refs.size() == 1 && refs[0].empty()) {
      throw ContractError(p.string() + ": line " + std::to_string(line_no) + " has no reference");
    }
    out.push_back(std::move(refs));
  }
  return out;
}

void cmd_evaluate(const Paths& paths, const RunConfig& cfg, const std::vector<std::string>& systems,
                  const fs::path& references, std::ostream& echo) {
  Log log(paths.log("evaluate"), echo);
  log.emit(config_event("evaluate", cfg));
  const auto refs = read_references(references);
  std::vector<std::pair<std::string, std::vector<Tokens>>> outputs;
  for (const auto& s : systems) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ContractError("--system expects name=path, got '" + s + "'");
    auto lines = read_outputs(s.substr(eq + 1));
    if (lines.size() != refs.size()) {
      const std::size_t first = std::min(lines.size(), refs.size()) + 1;
      throw ContractError("system '" + s.substr(0, eq) + "' has " + std::to_string(lines.size()) +
                          " lines but " + references.string() + " has " +
                          std::to_string(refs.size()) + "; line " + std::to_string(first) +
                          " has no counterpart");
    }
    outputs.emplace_back(s.substr(0, eq), std::move(lines));
  }
  const auto report = metrics::evaluate_systems(outputs, refs);
  const fs::path text = paths.report("evaluation.txt");
  const fs::path js = paths.report("evaluation.json");
  ensure_parent(text);
  {
    std::ofstream f(text, std::ios::binary | std::ios::trunc);
    f << report.text();
    std::ofstream g(js, std::ios::binary | std::ios::trunc);
    g << report.json();
    if (!f || !g) throw IoError("cannot write evaluation report under " + text.parent_path().string());
  }
  for (const auto& r : report.rows) {
    log.emit({{"event", "system"},
              {"name", r.name},
              {"diversity", r.diversity},
              {"bleu", r.bleu},
              {"meteor", r.meteor}});
  }
  log.emit({{"event", "done"}, {"text", text.string()}, {"json", js.string()}});
}

void cmd_retrieve(const Paths& paths, const RunConfig& cfg, const fs::path& train_file,
                  const fs::path& input, const fs::path& output, std::ostream& echo) {
  Log log(paths.log("baseline-retrieve"), echo);
  log.emit(config_event("baseline-retrieve", cfg));
  require_file(train_file, "training data", "ingest");
  const retrieval::TfIdfIndex index(corpus::read_triples(train_file));
  Rng rng(numerics::mix_seed(cfg.size("seed"), 105));
  std::vector<std::string> out;
  for (const auto& line : corpus::read_lines(input)) {
    Tokens ctx = corpus::preprocess(line);
    if (ctx.size() > corpus::kMaxContextLen) ctx.resize(corpus::kMaxContextLen);
    out.push_back(corpus::join(retrieval::lucene_baseline(ctx, index, rng)));
  }
  ensure_parent(output);
  corpus::write_lines(out, output);
  log.emit({{"event", "done"}, {"documents", index.size()}, {"output", output.string()}, {"lines", out.size()}});
}

void cmd_score(const Paths& paths, const RunConfig& cfg, const fs::path& checkpoint,
               const fs::path& input, const fs::path& output, std::ostream& echo) {
  Log log(paths.log("score"), echo);
  json c = config_event("score", cfg);
  c["checkpoint"] = checkpoint.string();
  log.emit(c);
  const Vocabulary vocab = load_vocab(paths);
  const Utility util = load_utility(checkpoint, "utility checkpoint", "pretrain --role utility", vocab);
  std::vector<corpus::EncodedTriple> data;
  std::size_t line_no = 0;
  for (const auto& raw : corpus::read_text_triples(input)) {
    ++line_no;
    corpus::Triple t;
    if (!corpus::make_triple(raw, t)) {
      throw ContractError(input.string() + ": triple " + std::to_string(line_no) + " has an empty field");
    }
    data.push_back(corpus::encode_triple(t, vocab));
  }
  std::vector<std::string> out;
  for (std::size_t start = 0; start < data.size(); start += 64) {
    std::vector<std::vector<int>> cs, qs, as;
    for (std::size_t i = start; i < std::min(data.size(), start + 64); ++i) {
      cs.push_back(data[i].context);
      qs.push_back(data[i].question);
      as.push_back(data[i].answer);
    }
    const auto scores = utility::utility_score(util, corpus::pad_sequences(cs), corpus::pad_sequences(qs),
                                               corpus::pad_sequences(as));
    for (double s : scores) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", s);
      out.emplace_back(buf);
    }
  }
  ensure_parent(output);
  corpus::write_lines(out, output);
  log.emit({{"event", "done"}, {"output", output.string()}, {"lines", out.size()}});
}

void report_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"event", "error"}, {"kind", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clarification question generation: training, decoding and evaluation"};
  app.name("clarigen");
  app.require_subcommand(1);
  Common common;
  std::size_t n = 0;
  std::string input, output, role, stage, checkpoint, mode = "beam", references, train_file;
  std::vector<std::string> systems;

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic triples file");
  add_common(synth, common);
  synth->add_option("--n", n, "Number of triples")->required();
  synth->add_option("--out", output, "Output JSONL")->required();

  auto* ingest = app.add_subcommand("ingest", "Preprocess triples, split 90/10 and build the vocabulary");
  add_common(ingest, common);
  ingest->add_option("--input", input, "JSONL with context, question, answer")->required();

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the generator, answer generator or utility");
  add_common(pretrain, common);
  pretrain->add_option("--role", role)->required()->check(CLI::IsMember({"generator", "answer", "utility"}));

  auto* train = app.add_subcommand("train", "Max-Utility or GAN-Utility training");
  add_common(train, common);
  train->add_option("--stage", stage)->required()->check(CLI::IsMember({"max-utility", "gan"}));

  auto* generate = app.add_subcommand("generate", "Decode one question per context line");
  add_common(generate, common);
  generate->add_option("--checkpoint", checkpoint)->required();
  generate->add_option("--input", input, "One context per line")->required();
  generate->add_option("--output", output)->required();
  generate->add_option("--mode", mode)->check(CLI::IsMember({"greedy", "beam"}))->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Diversity, BLEU and METEOR per system");
  add_common(evaluate, common);
  evaluate->add_option("--system", systems, "name=path, one output per line (repeatable)")->required();
  evaluate->add_option("--references", references, "References per line, separated by |||")->required();

  auto* retrieve = app.add_subcommand("baseline-retrieve", "TF-IDF retrieval baseline");
  add_common(retrieve, common);
  retrieve->add_option("--train", train_file, "Training JSONL (default: the run's train split)");
  retrieve->add_option("--input", input, "One context per line")->required();
  retrieve->add_option("--output", output)->required();

  auto* score = app.add_subcommand("score", "Utility probability per triple");
  add_common(score, common);
  score->add_option("--checkpoint", checkpoint, "Utility checkpoint (default: the run's utility)");
  score->add_option("--input", input, "JSONL with context, question, answer")->required();
  score->add_option("--output", output)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    report_error(err, "usage", e.what());
    return 1;
  }

  try {
    const RunConfig cfg = resolve(common);
    const Paths paths{common.run_dir};
    if (*synth) cmd_synth(paths, cfg, n, output, out);
    if (*ingest) cmd_ingest(paths, cfg, input, out);
    if (*pretrain) cmd_pretrain(paths, cfg, role, out);
    if (*train) cmd_train(paths, cfg, stage, out);
    if (*generate) cmd_generate(paths, cfg, checkpoint, input, output, mode, out);
    if (*evaluate) cmd_evaluate(paths, cfg, systems, references, out);
    if (*retrieve) {
      cmd_retrieve(paths, cfg, train_file.empty() ? paths.train() : fs::path(train_file), input, output, out);
    }
    if (*score) {
      cmd_score(paths, cfg, checkpoint.empty() ? paths.checkpoint("utility") : fs::path(checkpoint), input,
                output, out);
    }
  } catch (const ContractError& e) {
    report_error(err, "contract", e.what());
    return 1;
  } catch (const IoError& e) {
    report_error(err, "io", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    report_error(err, "io", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    report_error(err, "io", e.what());
    return 2;
  }
  return 0;
}

}  // namespace clarigen::cli
