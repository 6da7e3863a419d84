/*
 * Copyright 2026 The Trapkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// trapkit command-line driver.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trapkit/builtin_provider.h"
#include "trapkit/config.h"
#include "trapkit/dup_scan.h"
#include "trapkit/error.h"
#include "trapkit/eval.h"
#include "trapkit/event_log.h"
#include "trapkit/experiment.h"
#include "trapkit/injector.h"
#include "trapkit/mia.h"
#include "trapkit/ngram_model.h"
#include "trapkit/parallel.h"
#include "trapkit/rng.h"
#include "trapkit/trap_gen.h"
#include "trapkit/util.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trapkit;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitData = 4;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return kExitConfig;
    case ErrorCode::kTransport:
    case ErrorCode::kCapability:
      return kExitProvider;
    default:
      return kExitData;
  }
}

struct GlobalFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::string> endpoint;
  std::vector<std::string> sets;
  bool quiet = false;
};

ExperimentConfig LoadConfig(const GlobalFlags& flags) {
  json user = json::object();
  if (!flags.config_path.empty()) {
    std::string text;
    try {
      text = ReadFile(flags.config_path);
    } catch (const Error& e) {
      Fail(ErrorCode::kConfig, e.what());
    }
    user = json::parse(text, nullptr, false, true);
    if (user.is_discarded()) {
      Fail(ErrorCode::kConfig, flags.config_path + " is not valid JSON");
    }
  }
  json merged = MergeWithDefaults(user);
  for (const auto& s : flags.sets) ApplyAssignment(merged, s);
  if (flags.workers) merged["workers"] = *flags.workers;
  if (flags.out) merged["out"] = *flags.out;
  if (flags.endpoint) {
    merged["providers"]["target"]["kind"] = "remote";
    merged["providers"]["target"]["endpoint"] = *flags.endpoint;
    merged["providers"]["target"]["model_path"] = "";
  }
  if (flags.seed) {
    merged["seed"] = *flags.seed;
    for (auto& [_, v] : merged["seeds"].items()) v = nullptr;
  }
  // Re-merge so --set paths are checked like file keys.
  return ParseConfig(MergeWithDefaults(merged));
}

std::vector<std::string> ConfigMethods(const ExperimentConfig& c) {
  std::vector<std::string> names;
  for (Method m : c.methods) names.push_back(MethodName(m));
  return names;
}

// --- subcommands -----------------------------------------------------------

struct GenTrapsArgs {
  std::vector<size_t> lengths;
  std::string kind = "members";
  std::string real_doc;
};

void RunGenTraps(const ExperimentConfig& c, const GenTrapsArgs& a, EventLog& log) {
  const fs::path out(c.out);
  auto reference = BuildReference(c, log, out / "reference.model");
  uint64_t seed = c.seeds.generation;
  if (a.kind == "nonmembers") seed = c.seeds.nonmember_generation;
  if (a.kind == "control") seed = c.seeds.control_generation;
  const auto lengths = a.lengths.empty() ? c.lengths : a.lengths;
  for (size_t L : lengths) {
    GenerationReport report;
    json meta = {{"kind", a.kind}, {"length", L}, {"seed", DeriveSeed(seed, L)},
                 {"experiment", c.echo}};
    if (a.real_doc.empty()) {
      report = GenerateTraps(c, *reference, L, DeriveSeed(seed, L));
    } else {
      RealOptions o;
      o.target_len = L;
      o.quota_per_bucket = c.quota_per_bucket;
      o.spec = c.buckets;
      o.seed = DeriveSeed(seed, L);
      o.max_attempts = c.max_attempts;
      report = SampleReal(fs::path(a.real_doc).stem().string(), ReadFile(a.real_doc),
                          *reference, o);
      meta["source_doc"] = a.real_doc;
    }
    const fs::path path = out / "traps" / (a.kind + "-L" + std::to_string(L) + ".jsonl");
    WriteTrapSet(path, report.traps, meta);
    log.Emit("traps_generated", {{"path", path.string()}, {"admitted", report.traps.size()},
                                 {"per_bucket", report.per_bucket},
                                 {"shortfall", report.shortfall},
                                 {"attempts", report.attempts}});
  }
}

struct InjectArgs {
  std::string doc;
  std::string traps;
  std::string trap_id;
  int n_rep = 0;
};

void RunInject(const ExperimentConfig& c, const InjectArgs& a, EventLog& log) {
  const auto set = ReadTrapSet(a.traps);
  if (set.traps.empty()) throw InputError(a.traps + " holds no traps");
  const TrapSequence* trap = &set.traps.front();
  if (!a.trap_id.empty()) {
    trap = nullptr;
    for (const auto& t : set.traps) {
      if (t.id == a.trap_id) trap = &t;
    }
    if (!trap) throw InputError("trap '" + a.trap_id + "' not in " + a.traps);
  }
  const int n_rep = a.n_rep > 0 ? a.n_rep : c.n_reps.front();
  const fs::path doc(a.doc);
  const std::string doc_id = doc.stem().string();
  const auto inj = Inject(doc_id, ReadFile(doc), trap->id, trap->text, n_rep,
                          DeriveSeed(c.seeds.injection, 0));
  const fs::path dir = fs::path(c.out) / "injected";
  WriteFile(dir / (doc_id + ".txt"), inj.text);
  json record = ToJson(inj.record);
  record["config"] = c.echo;
  WriteFile(dir / (doc_id + ".injection.json"), record.dump(2) + "\n");
  log.Emit("injected", {{"doc_id", doc_id}, {"trap_id", trap->id}, {"n_rep", n_rep},
                        {"preexisting_occurrences", inj.preexisting_occurrences},
                        {"output", (dir / (doc_id + ".txt")).string()}});
}

struct ToyTrainArgs {
  std::vector<std::string> corpus;
};

void RunToyTrain(const ExperimentConfig& c, const ToyTrainArgs& a, EventLog& log) {
  std::vector<std::string> entries = a.corpus.empty() ? c.corpus_paths : a.corpus;
  std::vector<fs::path> files;
  for (const auto& e : entries) {
    if (fs::is_directory(e)) {
      for (const auto& f : fs::recursive_directory_iterator(e)) {
        if (f.is_regular_file() && f.path().extension() == ".txt") files.push_back(f.path());
      }
    } else {
      files.push_back(e);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) Fail(ErrorCode::kConfig, "toy-train needs corpus files");
  std::vector<std::string> texts;
  for (const auto& f : files) texts.push_back(ReadFile(f));
  TrainOptions o;
  o.order = c.toy.order;
  o.alpha = c.toy.alpha;
  o.checkpoint_every = c.toy.checkpoint_every;
  o.seed = c.seeds.training;
  o.epochs = c.toy.epochs;
  const auto snapshots = Train(texts, o);
  const fs::path dir = fs::path(c.out) / "models";
  for (const auto& s : snapshots) {
    const fs::path p = dir / ("target-step" + std::to_string(s.step) + ".model");
    s.model->Save(p, s.step);
    log.Emit("checkpoint_saved", {{"step", s.step}, {"path", p.string()}});
  }
  snapshots.back().model->Save(dir / "target.model", snapshots.back().step);
  log.Emit("toy_trained", {{"documents", texts.size()}, {"tokens", snapshots.back().step},
                           {"model", (dir / "target.model").string()}});
}

struct ScoreArgs {
  std::string members;
  std::string nonmembers;
};

void RunScore(const ExperimentConfig& c, const ScoreArgs& a, EventLog& log) {
  auto target = MakeProvider(c.target);
  auto reference = BuildReference(c, log);
  std::vector<Method> methods;
  for (Method m : c.methods) {
    if (m == Method::kRatioCtx) {
      log.Emit("method_skipped", {{"method", "ratio_ctx"},
                                  {"reason", "needs injection records; use run-all"}});
      continue;
    }
    methods.push_back(m);
  }
  std::vector<std::pair<TrapSequence, bool>> items;
  for (const auto& t : ReadTrapSet(a.members).traps) items.emplace_back(t, true);
  for (const auto& t : ReadTrapSet(a.nonmembers).traps) items.emplace_back(t, false);
  const auto records = ParallelMap<MembershipRecord>(items.size(), c.workers, [&](size_t i) {
    const auto& [trap, member] = items[i];
    MembershipRecord rec;
    rec.ref = trap.id;
    rec.member = member;
    rec.bucket = trap.bucket;
    rec.length = trap.length();
    for (Method m : methods) {
      rec.AddScore(ScoreText(m, *target, reference.get(), trap.text, c.k));
    }
    return rec;
  });
  const fs::path path = fs::path(c.out) / "scores.jsonl";
  WriteScores(path, records,
              {{"target", target->id()}, {"reference", reference->id()},
               {"members", a.members}, {"nonmembers", a.nonmembers},
               {"experiment", c.echo}});
  log.Emit("scored", {{"records", records.size()}, {"path", path.string()}});
}

void RunEvaluate(const ExperimentConfig& c, const std::string& scores_path,
                 const std::vector<std::string>& method_names, EventLog& log) {
  const auto set = ReadScores(scores_path);
  std::vector<Method> methods;
  for (const auto& n : method_names) methods.push_back(ParseMethod(n));
  if (methods.empty()) {
    for (const auto& s : set.records.front().scores) methods.push_back(s.method);
  }
  const fs::path dir = fs::path(c.out);
  json out = {{"format", "trapkit.evaluation"},
              {"scores", scores_path},
              {"scores_config", set.config},
              {"config", c.echo},
              {"reports", json::array()}};
  for (size_t i = 0; i < methods.size(); ++i) {
    EvalOptions o;
    o.n_perm = c.n_perm;
    o.bootstrap = c.bootstrap;
    o.seed = DeriveSeed(c.seeds.eval, i);
    const auto rep = Evaluate(set.records, methods[i], o);
    WriteBucketCsv(dir / ("buckets-" + MethodName(methods[i]) + ".csv"), rep.per_bucket);
    out["reports"].push_back(ToJson(rep));
    log.Emit("evaluated", {{"method", MethodName(methods[i])}, {"auc", rep.auc}});
  }
  WriteFile(dir / "evaluation.json", out.dump(2) + "\n");
}

struct DupScanArgs {
  std::vector<std::string> corpus;
  size_t window = 50;
  uint64_t min_count = 2;
  size_t samples_per_bin = 0;
};

void RunDupScan(const ExperimentConfig& c, const DupScanArgs& a, EventLog& log) {
  auto reference = BuildReference(c, log);
  std::vector<std::string> entries = a.corpus.empty() ? c.corpus_paths : a.corpus;
  std::vector<fs::path> files;
  for (const auto& e : entries) {
    if (fs::is_directory(e)) {
      for (const auto& f : fs::recursive_directory_iterator(e)) {
        if (f.is_regular_file() && f.path().extension() == ".txt") files.push_back(f.path());
      }
    } else {
      files.push_back(e);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) Fail(ErrorCode::kConfig, "dup-scan needs corpus files");
  std::vector<TokenizedDoc> corpus(files.size());
  ParallelFor(files.size(), c.workers, [&](size_t i) {
    corpus[i].doc_id = files[i].stem().string();
    corpus[i].ids = reference->Tokenize(ReadFile(files[i])).ids;
  });
  const auto dups = FindDuplicates(corpus, a.window, a.min_count, c.workers);
  const fs::path dir(c.out);
  WriteDuplicates(dir / "duplicates.jsonl", dups);
  log.Emit("dup_scan", {{"documents", files.size()}, {"window", a.window},
                        {"distinct_windows", dups.size()}});
  if (a.samples_per_bin > 0) {
    const auto bins = PerplexityByRepetition(dups, *reference, DefaultRepetitionBins(),
                                             a.samples_per_bin, c.seeds.mia);
    WriteBinCsv(dir / "perplexity_by_repetition.csv", bins);
  }
}

struct EmitHtmlArgs {
  std::string text;
  std::string traps;
  std::string trap_id;
  int n_rep = 0;
  std::string output;
};

void RunEmitHtml(const ExperimentConfig& c, const EmitHtmlArgs& a) {
  std::string text = a.text;
  if (text.empty()) {
    if (a.traps.empty()) throw InputError("emit-html needs --text or --traps");
    const auto set = ReadTrapSet(a.traps);
    for (const auto& t : set.traps) {
      if (a.trap_id.empty() || t.id == a.trap_id) {
        text = t.text;
        break;
      }
    }
    if (text.empty()) throw InputError("no matching trap in " + a.traps);
  }
  const int n_rep = a.n_rep > 0 ? a.n_rep : c.n_reps.front();
  const std::string html = EmitHtmlTrap(text, n_rep);
  if (a.output.empty()) {
    std::cout << html << '\n';
  } else {
    WriteFile(a.output, html + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapkit: copyright trap generation, injection and detection"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config_path, "Experiment configuration (JSON)");
  app.add_option("--seed", g.seed, "Master seed; re-derives every stage seed");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--provider-endpoint", g.endpoint, "Remote target provider URL");
  app.add_option("--set", g.sets, "Override a config key: dotted.path=value");
  app.add_flag("--quiet", g.quiet, "Do not echo log events to stderr");

  GenTrapsArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-traps", "Generate trap sequences");
  gen_cmd->add_option("--length", gen.lengths, "Trap lengths (default: config)");
  gen_cmd->add_option("--kind", gen.kind, "members, nonmembers or control")
      ->check(CLI::IsMember({"members", "nonmembers", "control"}));
  gen_cmd->add_option("--real", gen.real_doc, "Sample real windows from this document");

  InjectArgs inj;
  auto* inj_cmd = app.add_subcommand("inject", "Inject a trap into a document");
  inj_cmd->add_option("--doc", inj.doc, "Document")->required();
  inj_cmd->add_option("--traps", inj.traps, "Trap set file")->required();
  inj_cmd->add_option("--trap-id", inj.trap_id, "Trap id (default: first)");
  inj_cmd->add_option("--n-rep", inj.n_rep, "Repetitions (default: first config value)");

  ToyTrainArgs toy;
  auto* toy_cmd = app.add_subcommand("toy-train", "Train the builtin n-gram model");
  toy_cmd->add_option("--corpus", toy.corpus, "Corpus files or directories");

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score member and non-member traps");
  score_cmd->add_option("--members", score.members, "Member trap set")->required();
  score_cmd->add_option("--nonmembers", score.nonmembers, "Non-member trap set")->required();

  std::string scores_path;
  std::vector<std::string> eval_methods;
  auto* eval_cmd = app.add_subcommand("evaluate", "AUC report from a score file");
  eval_cmd->add_option("scores", scores_path, "Score file")->required();
  eval_cmd->add_option("--method", eval_methods, "Methods (default: all in the file)");

  DupScanArgs dup;
  auto* dup_cmd = app.add_subcommand("dup-scan", "Count duplicate token windows");
  dup_cmd->add_option("--corpus", dup.corpus, "Corpus files or directories");
  dup_cmd->add_option("--window", dup.window, "Window length in tokens");
  dup_cmd->add_option("--min-count", dup.min_count, "Minimum repetition count");
  dup_cmd->add_option("--samples-per-bin", dup.samples_per_bin,
                      "Perplexity-by-repetition samples per bin (0: skip)");

  EmitHtmlArgs html;
  auto* html_cmd = app.add_subcommand("emit-html", "Hidden HTML trap markup");
  html_cmd->add_option("--text", html.text, "Trap text");
  html_cmd->add_option("--traps", html.traps, "Trap set file");
  html_cmd->add_option("--trap-id", html.trap_id, "Trap id (default: first)");
  html_cmd->add_option("--n-rep", html.n_rep, "Repetitions (default: first config value)");
  html_cmd->add_option("--output", html.output, "Output file (default: stdout)");

  auto* all_cmd = app.add_subcommand("run-all", "Full experiment from the configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const ExperimentConfig config = LoadConfig(g);
    EventLog log(g.quiet ? nullptr : &std::cerr);
    if (!html_cmd->parsed()) log.OpenFile(fs::path(config.out) / "log.jsonl");
    log.Emit("command", {{"name", app.get_subcommands().front()->get_name()},
                         {"seeds", config.echo.at("seeds")},
                         {"methods", ConfigMethods(config)}});
    if (gen_cmd->parsed()) RunGenTraps(config, gen, log);
    if (inj_cmd->parsed()) RunInject(config, inj, log);
    if (toy_cmd->parsed()) RunToyTrain(config, toy, log);
    if (score_cmd->parsed()) RunScore(config, score, log);
    if (eval_cmd->parsed()) RunEvaluate(config, scores_path, eval_methods, log);
    if (dup_cmd->parsed()) RunDupScan(config, dup, log);
    if (html_cmd->parsed()) RunEmitHtml(config, html);
    if (all_cmd->parsed()) RunExperiment(config, log);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "trapkit: " << ErrorCodeName(e.code()) << ": " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "trapkit: " << e.what() << '\n';
    return kExitData;
  }
}
