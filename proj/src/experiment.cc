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

#include "trapkit/experiment.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_set>

#include "trapkit/builtin_provider.h"
#include "trapkit/corpus.h"
#include "trapkit/error.h"
#include "trapkit/injector.h"
#include "trapkit/ngram_model.h"
#include "trapkit/parallel.h"
#include "trapkit/rng.h"
#include "trapkit/toy_corpus.h"
#include "trapkit/util.h"

namespace trapkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed streams within a stage.
constexpr uint64_t kContextStream = 1;
constexpr uint64_t kDocMiaSplitStream = 2;
constexpr uint64_t kDocMiaExcerptStream = 3;

std::vector<fs::path> ExpandCorpusPaths(const std::vector<std::string>& entries) {
  std::vector<fs::path> out;
  for (const auto& entry : entries) {
    const fs::path p(entry);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

bool IsTrainable(const ProviderConfig& p) {
  return p.kind == ProviderConfig::Kind::kBuiltin && p.model_path.empty();
}

TrainOptions ToyTrainOptions(const ExperimentConfig& config, uint64_t seed) {
  TrainOptions t;
  t.order = config.toy.order;
  t.alpha = config.toy.alpha;
  t.checkpoint_every = config.toy.checkpoint_every;
  t.seed = seed;
  t.epochs = config.toy.epochs;
  return t;
}

json ShortfallJson(const GenerationReport& r) {
  return {{"admitted", r.traps.size()},   {"per_bucket", r.per_bucket},
          {"shortfall", r.shortfall},     {"attempts", r.attempts},
          {"out_of_range", r.out_of_range}, {"bucket_full", r.bucket_full},
          {"rejected", r.rejected}};
}

// One training run: a target and the n_rep values whose cells it serves.
struct Run {
  std::string name;
  std::vector<int> n_reps;
};

struct PlacedTrap {
  TrapSequence trap;
  size_t doc_index = 0;  // into the accepted documents
  Injection injection;
};

struct Cell {
  size_t length = 0;
  int n_rep = 0;
  std::vector<PlacedTrap> members;
  std::vector<TrapSequence> nonmembers;
};

MembershipRecord RecordFor(const TrapSequence& trap, bool member, int n_rep) {
  MembershipRecord r;
  r.ref = trap.id;
  r.member = member;
  r.bucket = trap.bucket;
  r.length = trap.length();
  r.n_rep = n_rep;
  return r;
}

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& config, EventLog& log)
      : c_(config), log_(log), out_(config.out) {}

  ExperimentResult Run();

 private:
  void PrepareCorpus();
  void GeneratePools();
  std::vector<Cell> PlaceTraps(const struct Run& run, size_t run_index);
  std::unique_ptr<Provider> TargetFor(const struct Run& run,
                                      const std::vector<Cell>& cells,
                                      std::vector<ProviderSnapshot>& snapshots);
  std::vector<MembershipRecord> ScoreTraps(const Provider& target,
                                           const std::vector<const TrapSequence*>& traps,
                                           const std::vector<const PlacedTrap*>& placed,
                                           bool member, int n_rep,
                                           uint64_t stream);
  void EvaluateCell(CellResult& cell, const std::vector<Method>& methods,
                    const std::vector<ProviderSnapshot>& snapshots,
                    const std::vector<std::string>& member_texts,
                    const std::vector<std::string>& nonmember_texts);
  std::optional<DocMiaResult> RunDocMia(const Provider& target,
                                        const std::string& run_name);
  const std::string& Text(size_t doc_index);
  json BuildReport(const ExperimentResult& result) const;
  void WriteTable(const ExperimentResult& result) const;

  const ExperimentConfig& c_;
  EventLog& log_;
  fs::path out_;
  std::unique_ptr<Provider> reference_;
  ExperimentManifest manifest_;
  std::vector<DocumentRecord>& docs() { return manifest_.documents; }
  std::map<size_t, std::string> text_cache_;
  std::vector<size_t> injected_order_;  // doc indices, shuffled
  std::vector<size_t> nonmember_docs_;
  std::map<size_t, std::vector<TrapSequence>> member_pool_;
  std::map<size_t, std::vector<TrapSequence>> nonmember_pool_;
  std::map<size_t, std::vector<TrapSequence>> control_pool_;
  uint64_t eval_stream_ = 0;
  std::string target_id_;
};

const std::string& Pipeline::Text(size_t doc_index) {
  auto it = text_cache_.find(doc_index);
  if (it == text_cache_.end()) {
    it = text_cache_.emplace(doc_index, ReadFile(docs()[doc_index].path)).first;
  }
  return it->second;
}

void Pipeline::PrepareCorpus() {
  std::vector<fs::path> paths = ExpandCorpusPaths(c_.corpus_paths);
  if (paths.empty()) {
    if (c_.toy.docs == 0) {
      Fail(ErrorCode::kConfig,
           "config field 'corpus.paths': empty and toy.docs is 0, no corpus to use");
    }
    const ToyLexicon lexicon(c_.toy.lexicon_seed, c_.toy.lexicon_size);
    const auto texts =
        ToyDocuments(lexicon, c_.toy.docs, c_.toy.words_per_doc, c_.seeds.toy_corpus);
    char name[32];
    for (size_t i = 0; i < texts.size(); ++i) {
      std::snprintf(name, sizeof(name), "doc-%05zu.txt", i);
      paths.push_back(out_ / "corpus" / name);
      WriteFile(paths.back(), texts[i]);
    }
    log_.Emit("toy_corpus", {{"docs", texts.size()}, {"dir", (out_ / "corpus").string()}});
  }
  auto ingest = Ingest(paths, *reference_, c_.min_tokens, c_.workers);
  for (const auto& e : ingest.excluded) {
    log_.Emit("document_excluded", {{"path", e.path.string()}, {"reason", e.reason}});
  }
  SplitRoles(ingest.accepted, c_.n_members, c_.n_nonmembers, c_.n_injected,
             c_.seeds.split);
  manifest_.documents = std::move(ingest.accepted);
  for (size_t i = 0; i < docs().size(); ++i) {
    if (docs()[i].role == Role::kMemberInjected) injected_order_.push_back(i);
    if (docs()[i].role == Role::kNonmemberClean) nonmember_docs_.push_back(i);
  }
  SplitMix64 rng(c_.seeds.injection);
  rng.Shuffle(std::span<size_t>(injected_order_));
  log_.Emit("corpus", {{"accepted", docs().size()},
                       {"excluded", ingest.excluded.size()},
                       {"member_injected", injected_order_.size()},
                       {"nonmember_clean", nonmember_docs_.size()}});
}

void Pipeline::GeneratePools() {
  for (size_t L : c_.lengths) {
    std::vector<std::string> taken;
    auto generate = [&](const char* kind, uint64_t seed,
                        std::map<size_t, std::vector<TrapSequence>>& pool) {
      auto report = GenerateTraps(c_, *reference_, L, DeriveSeed(seed, L));
      json stats = ShortfallJson(report);
      auto traps = DropRepeatedTexts(std::move(report.traps), taken);
      stats["kept_after_dedup"] = traps.size();
      stats["kind"] = kind;
      stats["length"] = L;
      log_.Emit("traps_generated", stats);
      const fs::path path =
          out_ / "traps" / (std::string(kind) + "-L" + std::to_string(L) + ".jsonl");
      WriteTrapSet(path, traps,
                   {{"kind", kind}, {"length", L}, {"seed", DeriveSeed(seed, L)},
                    {"experiment", c_.echo}});
      manifest_.trap_sets.push_back(path.string());
      pool[L] = std::move(traps);
    };
    generate("members", c_.seeds.generation, member_pool_);
    generate("nonmembers", c_.seeds.nonmember_generation, nonmember_pool_);
    if (c_.control) generate("control", c_.seeds.control_generation, control_pool_);
  }
}

std::vector<Cell> Pipeline::PlaceTraps(const struct Run& run, size_t run_index) {
  const size_t n_cells = c_.lengths.size() * run.n_reps.size();
  const size_t capacity = injected_order_.size() / n_cells;
  if (capacity == 0) {
    Fail(ErrorCode::kConfig,
         "config field 'corpus.n_injected': " + std::to_string(injected_order_.size()) +
             " injected documents cannot serve " + std::to_string(n_cells) + " cells");
  }
  std::vector<Cell> cells;
  size_t slot = 0;
  for (size_t L : c_.lengths) {
    // Deal the interleaved pool round-robin over this length's cells.
    const auto order = InterleaveByBucket(member_pool_.at(L));
    std::vector<std::vector<TrapSequence>> dealt(run.n_reps.size());
    size_t next = 0;
    for (const auto& trap : order) {
      size_t tries = 0;
      while (tries < dealt.size() && dealt[next].size() >= capacity) {
        next = (next + 1) % dealt.size();
        ++tries;
      }
      if (tries == dealt.size()) break;
      dealt[next].push_back(trap);
      next = (next + 1) % dealt.size();
    }
    for (size_t r = 0; r < run.n_reps.size(); ++r) {
      Cell cell;
      cell.length = L;
      cell.n_rep = run.n_reps[r];
      std::vector<TrapSequence> members = std::move(dealt[r]);
      cell.nonmembers = nonmember_pool_.at(L);
      MatchStratification(members, cell.nonmembers);
      const fs::path dir = out_ / "injected" / run.name;
      for (size_t t = 0; t < members.size(); ++t) {
        PlacedTrap p;
        p.doc_index = injected_order_[slot * capacity + t];
        DocumentRecord& doc = docs()[p.doc_index];
        p.injection = Inject(doc.doc_id, Text(p.doc_index), members[t].id,
                             members[t].text, cell.n_rep,
                             DeriveSeed(c_.seeds.injection, p.doc_index));
        if (p.injection.preexisting_occurrences > 0) {
          log_.Emit("trap_preexisting", {{"doc_id", doc.doc_id},
                                         {"trap_id", members[t].id},
                                         {"occurrences", p.injection.preexisting_occurrences}});
        }
        if (!doc.trap_id) {
          manifest_.AssignTrap(doc.doc_id, members[t].id);
        } else if (*doc.trap_id != members[t].id) {
          Fail(ErrorCode::kIntegrity, "document '" + doc.doc_id +
                                          "' received different traps across runs");
        }
        WriteFile(dir / (doc.doc_id + ".txt"), p.injection.text);
        WriteFile(dir / (doc.doc_id + ".injection.json"),
                  ToJson(p.injection.record).dump(2) + "\n");
        members[t].member = true;
        p.trap = std::move(members[t]);
        cell.members.push_back(std::move(p));
      }
      log_.Emit("cell_placed", {{"run", run.name}, {"run_index", run_index},
                                {"length", L}, {"n_rep", cell.n_rep},
                                {"members", cell.members.size()},
                                {"nonmembers", cell.nonmembers.size()}});
      cells.push_back(std::move(cell));
      ++slot;
    }
  }
  return cells;
}

std::unique_ptr<Provider> Pipeline::TargetFor(const struct Run& run,
                                              const std::vector<Cell>& cells,
                                              std::vector<ProviderSnapshot>& snapshots) {
  snapshots.clear();
  if (!IsTrainable(c_.target)) return MakeProvider(c_.target);
  std::map<size_t, const std::string*> modified;
  for (const auto& cell : cells) {
    for (const auto& p : cell.members) modified[p.doc_index] = &p.injection.text;
  }
  std::vector<std::string> corpus;
  for (size_t i = 0; i < docs().size(); ++i) {
    if (docs()[i].role == Role::kNonmemberClean) continue;
    auto it = modified.find(i);
    corpus.push_back(it != modified.end() ? *it->second : Text(i));
  }
  snapshots = Train(corpus, ToyTrainOptions(c_, c_.seeds.training));
  const auto& final_snapshot = snapshots.back();
  const fs::path model_path = out_ / "models" / (run.name + ".model");
  fs::create_directories(model_path.parent_path());
  final_snapshot.model->Save(model_path, final_snapshot.step);
  log_.Emit("target_trained", {{"run", run.name},
                               {"documents", corpus.size()},
                               {"tokens", final_snapshot.step},
                               {"snapshots", snapshots.size()},
                               {"model", model_path.string()}});
  return std::make_unique<BuiltinProvider>(final_snapshot.model);
}

std::vector<MembershipRecord> Pipeline::ScoreTraps(
    const Provider& target, const std::vector<const TrapSequence*>& traps,
    const std::vector<const PlacedTrap*>& placed, bool member, int n_rep,
    uint64_t stream) {
  const uint64_t ctx_seed = DeriveSeed(DeriveSeed(c_.seeds.mia, kContextStream), stream);
  const bool need_ctx = std::find(c_.methods.begin(), c_.methods.end(),
                                  Method::kRatioCtx) != c_.methods.end();
  // Texts are read before fanning out; the cache is not thread-safe.
  std::vector<const std::string*> ctx_docs(traps.size(), nullptr);
  if (need_ctx) {
    if (!member && nonmember_docs_.empty()) {
      Fail(ErrorCode::kConfig,
           "config field 'corpus.n_nonmembers': ratio_ctx needs non-member documents "
           "for non-member contexts");
    }
    for (size_t i = 0; i < traps.size(); ++i) {
      const size_t doc = member ? placed[i]->doc_index
                                : nonmember_docs_[i % nonmember_docs_.size()];
      ctx_docs[i] = &Text(doc);
    }
  }
  return ParallelMap<MembershipRecord>(traps.size(), c_.workers, [&](size_t i) {
    const TrapSequence& trap = *traps[i];
    MembershipRecord rec = RecordFor(trap, member, n_rep);
    for (Method m : c_.methods) {
      if (m != Method::kRatioCtx) {
        rec.AddScore(ScoreText(m, target, reference_.get(), trap.text, c_.k));
      } else if (member) {
        rec.AddScore(RatioWithContext(target, *reference_, placed[i]->injection.record,
                                      *ctx_docs[i], c_.ctx_len, DeriveSeed(ctx_seed, i)));
      } else {
        const std::string ctx = NonMemberContext(*reference_, *ctx_docs[i], c_.ctx_len,
                                                 DeriveSeed(ctx_seed, i));
        AttackScore s = RatioWithContextText(target, *reference_, trap.text, ctx);
        s.params["context_doc"] = docs()[nonmember_docs_[i % nonmember_docs_.size()]].doc_id;
        rec.AddScore(std::move(s));
      }
    }
    return rec;
  });
}

void Pipeline::EvaluateCell(CellResult& cell, const std::vector<Method>& methods,
                            const std::vector<ProviderSnapshot>& snapshots,
                            const std::vector<std::string>& member_texts,
                            const std::vector<std::string>& nonmember_texts) {
  const fs::path eval_dir = out_ / "eval" / cell.run;
  const json cell_json = {{"run", cell.run}, {"length", cell.length},
                          {"n_rep", cell.n_rep}, {"control", cell.control}};
  WriteScores(out_ / "scores" / cell.run / (cell.Name() + ".jsonl"), cell.records,
              {{"cell", cell_json}, {"experiment", c_.echo}});
  for (Method m : methods) {
    EvalOptions opts;
    opts.n_perm = c_.n_perm;
    opts.bootstrap = c_.bootstrap;
    opts.seed = DeriveSeed(c_.seeds.eval, eval_stream_++);
    EvaluationReport rep = Evaluate(cell.records, m, opts);
    if (snapshots.size() >= 2 && m != Method::kRatioCtx) {
      rep.per_checkpoint = CheckpointCurve(snapshots, reference_.get(), member_texts,
                                           nonmember_texts, m, c_.k, c_.workers);
      WriteCheckpointCsv(eval_dir / (cell.Name() + "-" + MethodName(m) + "-checkpoints.csv"),
                         rep.per_checkpoint);
    }
    rep.config = cell_json;
    WriteBucketCsv(eval_dir / (cell.Name() + "-" + MethodName(m) + "-buckets.csv"),
                   rep.per_bucket);
    log_.Emit("cell_evaluated", {{"cell", cell.Name()}, {"run", cell.run},
                                 {"method", MethodName(m)}, {"auc", rep.auc},
                                 {"n_members", rep.n_members},
                                 {"n_nonmembers", rep.n_nonmembers}});
    cell.reports.push_back(std::move(rep));
  }
}

std::optional<DocMiaResult> Pipeline::RunDocMia(const Provider& target,
                                                const std::string& run_name) {
  std::vector<size_t> members, nonmembers;
  for (size_t i = 0; i < docs().size(); ++i) {
    if (docs()[i].role == Role::kMemberClean) members.push_back(i);
    if (docs()[i].role == Role::kNonmemberClean) nonmembers.push_back(i);
  }
  SplitMix64 rng(DeriveSeed(c_.seeds.mia, kDocMiaSplitStream));
  rng.Shuffle(std::span<size_t>(members));
  rng.Shuffle(std::span<size_t>(nonmembers));
  const double f = c_.doc_mia.calibration_fraction;
  const size_t cal_m = static_cast<size_t>(f * members.size());
  const size_t cal_n = static_cast<size_t>(f * nonmembers.size());
  if (cal_m == 0 || cal_n == 0 || cal_m == members.size() || cal_n == nonmembers.size()) {
    Fail(ErrorCode::kConfig,
         "config field 'doc_mia.calibration_fraction': both halves need member and "
         "non-member documents (have " + std::to_string(members.size()) + " and " +
             std::to_string(nonmembers.size()) + ")");
  }
  const uint64_t excerpt_seed = DeriveSeed(c_.seeds.mia, kDocMiaExcerptStream);
  std::vector<size_t> all;
  for (size_t i : members) all.push_back(i);
  for (size_t i : nonmembers) all.push_back(i);
  for (size_t i : all) Text(i);
  const auto excerpt_scores =
      ParallelMap<std::vector<double>>(all.size(), c_.workers, [&](size_t j) {
        return ExcerptMinKScores(target, text_cache_.at(all[j]), c_.doc_mia.excerpt_len,
                                 c_.doc_mia.n_excerpts, c_.doc_mia.k,
                                 DeriveSeed(excerpt_seed, all[j]));
      });
  std::vector<double> cal_scores;
  std::vector<bool> cal_labels;
  auto add_cal = [&](size_t j, bool member) {
    for (double s : excerpt_scores[j]) {
      cal_scores.push_back(s);
      cal_labels.push_back(member);
    }
  };
  for (size_t j = 0; j < cal_m; ++j) add_cal(j, true);
  for (size_t j = 0; j < cal_n; ++j) add_cal(members.size() + j, false);
  DocMiaResult out;
  out.run = run_name;
  out.n_calibration = cal_m + cal_n;
  out.threshold = ThresholdMaxAccuracy(cal_scores, cal_labels, Orientation::kHigherIsMember);

  std::vector<MembershipRecord> records;
  auto add_eval = [&](size_t j, bool member) {
    const auto& s = excerpt_scores[j];
    const auto above = std::count_if(s.begin(), s.end(),
                                     [&](double v) { return v > out.threshold; });
    MembershipRecord rec;
    rec.ref = docs()[all[j]].doc_id;
    rec.member = member;
    rec.length = docs()[all[j]].token_count;
    AttackScore score{Method::kDocMinK,
                      static_cast<double>(above) / static_cast<double>(s.size()),
                      Orientation::kHigherIsMember,
                      {{"k", c_.doc_mia.k}, {"threshold", out.threshold},
                       {"excerpt_len", c_.doc_mia.excerpt_len},
                       {"n_excerpts", c_.doc_mia.n_excerpts}}};
    rec.AddScore(std::move(score));
    records.push_back(std::move(rec));
  };
  for (size_t j = cal_m; j < members.size(); ++j) add_eval(j, true);
  for (size_t j = cal_n; j < nonmembers.size(); ++j) add_eval(members.size() + j, false);
  EvalOptions opts;
  opts.n_perm = c_.n_perm;
  opts.bootstrap = c_.bootstrap;
  opts.seed = DeriveSeed(c_.seeds.eval, eval_stream_++);
  out.report = Evaluate(records, Method::kDocMinK, opts);
  out.report.config = {{"run", run_name}, {"threshold", out.threshold},
                       {"n_calibration_docs", out.n_calibration}};
  WriteScores(out_ / "scores" / run_name / "doc_min_k.jsonl", records,
              {{"threshold", out.threshold}, {"experiment", c_.echo}});
  log_.Emit("doc_mia_evaluated", {{"run", run_name}, {"auc", out.report.auc},
                                  {"threshold", out.threshold}});
  return out;
}

json Pipeline::BuildReport(const ExperimentResult& result) const {
  json cells = json::array();
  json table = json::array();
  json controls = json::array();
  for (const auto& cell : result.cells) {
    json methods = json::object();
    for (const auto& rep : cell.reports) {
      methods[MethodName(rep.method)] = ToJson(rep);
      json row = {{"length", cell.length}, {"n_rep", cell.n_rep},
                  {"method", MethodName(rep.method)}, {"auc", rep.auc},
                  {"run", cell.run}};
      (cell.control ? controls : table).push_back(row);
    }
    cells.push_back({{"name", cell.Name()}, {"run", cell.run}, {"length", cell.length},
                     {"n_rep", cell.n_rep}, {"control", cell.control},
                     {"methods", methods}});
  }
  json report = {{"format", "trapkit.report"},
                 {"version", 1},
                 {"manifest_id", result.manifest_id},
                 {"providers",
                  {{"target", target_id_}, {"reference", reference_->id()}}},
                 {"provider_nondeterminism",
                  c_.target.kind == ProviderConfig::Kind::kRemote ||
                      c_.reference.kind == ProviderConfig::Kind::kRemote},
                 {"auc_table", table},
                 {"control_table", controls},
                 {"cells", cells},
                 {"config", c_.echo}};
  if (result.doc_mia) {
    report["doc_mia"] = ToJson(result.doc_mia->report);
  }
  return report;
}

void Pipeline::WriteTable(const ExperimentResult& result) const {
  std::string csv = "length,n_rep,method,auc,ci_lower,ci_upper,n_members,n_nonmembers,run,control\n";
  char buf[256];
  for (const auto& cell : result.cells) {
    for (const auto& rep : cell.reports) {
      const double lo = rep.ci ? rep.ci->lower : rep.auc;
      const double hi = rep.ci ? rep.ci->upper : rep.auc;
      std::snprintf(buf, sizeof(buf), "%zu,%d,%s,%.6f,%.6f,%.6f,%zu,%zu,%s,%d\n",
                    cell.length, cell.n_rep, MethodName(rep.method).c_str(), rep.auc,
                    lo, hi, rep.n_members, rep.n_nonmembers, cell.run.c_str(),
                    cell.control ? 1 : 0);
      csv += buf;
    }
  }
  WriteFile(out_ / "auc_table.csv", csv);
}

ExperimentResult Pipeline::Run() {
  fs::create_directories(out_);
  log_.Emit("run_start", {{"out", out_.string()}, {"workers", c_.workers}});
  reference_ = BuildReference(c_, log_, out_ / "reference.model");
  PrepareCorpus();
  manifest_.config = c_.echo;
  manifest_.id = ManifestId(c_.echo);
  manifest_.reference_provider = reference_->id();
  manifest_.seeds = c_.echo.at("seeds");
  GeneratePools();

  std::vector<struct Run> runs;
  if (c_.toy.separate_runs && IsTrainable(c_.target)) {
    for (int n : c_.n_reps) runs.push_back({"nrep-" + std::to_string(n), {n}});
  } else {
    runs.push_back({"main", c_.n_reps});
  }

  ExperimentResult result;
  result.manifest_id = manifest_.id;
  for (size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    std::vector<Cell> cells = PlaceTraps(run, r);
    std::vector<ProviderSnapshot> snapshots;
    const auto target = TargetFor(run, cells, snapshots);
    target_id_ = target->id();
    manifest_.target_provider = target_id_;
    WriteManifest(out_ / "manifest.json", manifest_);

    for (const auto& cell : cells) {
      std::vector<const TrapSequence*> m_traps, n_traps;
      std::vector<const PlacedTrap*> placed;
      std::vector<std::string> m_texts, n_texts;
      for (const auto& p : cell.members) {
        m_traps.push_back(&p.trap);
        placed.push_back(&p);
        m_texts.push_back(p.trap.text);
      }
      for (const auto& t : cell.nonmembers) {
        n_traps.push_back(&t);
        n_texts.push_back(t.text);
      }
      CellResult res;
      res.run = run.name;
      res.length = cell.length;
      res.n_rep = cell.n_rep;
      res.records = ScoreTraps(*target, m_traps, placed, true, cell.n_rep, 2 * eval_stream_);
      auto nm = ScoreTraps(*target, n_traps, {}, false, cell.n_rep, 2 * eval_stream_ + 1);
      res.records.insert(res.records.end(), nm.begin(), nm.end());
      EvaluateCell(res, c_.methods, snapshots, m_texts, n_texts);
      result.cells.push_back(std::move(res));
    }

    if (c_.control) {
      for (size_t L : c_.lengths) {
        std::vector<TrapSequence> fake = control_pool_.at(L);
        std::vector<TrapSequence> real = nonmember_pool_.at(L);
        MatchStratification(fake, real);
        std::vector<const TrapSequence*> f_ptr, r_ptr;
        std::vector<std::string> f_texts, r_texts;
        for (const auto& t : fake) {
          f_ptr.push_back(&t);
          f_texts.push_back(t.text);
        }
        for (const auto& t : real) {
          r_ptr.push_back(&t);
          r_texts.push_back(t.text);
        }
        // Control traps have no placement, so no context-conditioned score.
        std::vector<Method> methods = c_.methods;
        std::erase(methods, Method::kRatioCtx);
        auto score_all = [&](const std::vector<const TrapSequence*>& ts, bool member) {
          return ParallelMap<MembershipRecord>(ts.size(), c_.workers, [&](size_t i) {
            MembershipRecord rec = RecordFor(*ts[i], member, 0);
            for (Method m : methods) {
              rec.AddScore(ScoreText(m, *target, reference_.get(), ts[i]->text, c_.k));
            }
            return rec;
          });
        };
        CellResult res;
        res.run = run.name;
        res.length = L;
        res.control = true;
        res.records = score_all(f_ptr, true);
        auto nr = score_all(r_ptr, false);
        res.records.insert(res.records.end(), nr.begin(), nr.end());
        EvaluateCell(res, methods, snapshots, f_texts, r_texts);
        result.cells.push_back(std::move(res));
      }
    }

    if (c_.doc_mia.enabled && !result.doc_mia) {
      result.doc_mia = RunDocMia(*target, run.name);
    }
  }

  result.report = BuildReport(result);
  WriteFile(out_ / "report.json", result.report.dump(2) + "\n");
  WriteTable(result);
  log_.Emit("run_complete", {{"cells", result.cells.size()},
                             {"report", (out_ / "report.json").string()}});
  return result;
}

}  // namespace

std::unique_ptr<Provider> BuildReference(const ExperimentConfig& config, EventLog& log,
                                         const std::optional<fs::path>& save_path) {
  if (!IsTrainable(config.reference)) return MakeProvider(config.reference);
  if (config.toy.reference_docs == 0) {
    log.Emit("reference_uniform");
    return BuiltinProvider::Uniform(config.toy.order, config.toy.alpha);
  }
  const ToyLexicon lexicon(config.toy.lexicon_seed, config.toy.lexicon_size);
  const auto texts = ToyDocuments(lexicon, config.toy.reference_docs,
                                  config.toy.words_per_doc, config.seeds.toy_reference);
  TrainOptions opts = ToyTrainOptions(config, config.seeds.toy_reference);
  opts.checkpoint_every = 0;
  const auto snapshots = Train(texts, opts);
  if (save_path) snapshots.back().model->Save(*save_path, snapshots.back().step);
  log.Emit("reference_trained", {{"documents", texts.size()},
                                 {"tokens", snapshots.back().step}});
  return std::make_unique<BuiltinProvider>(snapshots.back().model);
}

GenerationReport GenerateTraps(const ExperimentConfig& config, const Provider& reference,
                               size_t length, uint64_t seed) {
  SyntheticOptions o;
  o.target_len = length;
  o.top_k = config.top_k;
  o.temperatures = config.temperatures;
  o.quota_per_bucket = config.quota_per_bucket;
  o.spec = config.buckets;
  o.seed = seed;
  o.max_attempts = config.max_attempts;
  o.workers = config.workers;
  return GenerateSynthetic(reference, o);
}

std::vector<TrapSequence> InterleaveByBucket(const std::vector<TrapSequence>& traps) {
  std::map<int, std::vector<const TrapSequence*>> by_bucket;
  for (const auto& t : traps) by_bucket[t.bucket.value_or(0)].push_back(&t);
  std::vector<TrapSequence> out;
  for (size_t round = 0; out.size() < traps.size(); ++round) {
    for (const auto& [_, list] : by_bucket) {
      if (round < list.size()) out.push_back(*list[round]);
    }
  }
  return out;
}

std::vector<TrapSequence> DropRepeatedTexts(std::vector<TrapSequence> pool,
                                            std::vector<std::string>& taken) {
  std::unordered_set<std::string> seen(taken.begin(), taken.end());
  std::vector<TrapSequence> out;
  for (auto& t : pool) {
    if (!seen.insert(t.text).second) continue;
    taken.push_back(t.text);
    out.push_back(std::move(t));
  }
  return out;
}

const EvaluationReport* CellResult::Find(Method method) const {
  for (const auto& r : reports) {
    if (r.method == method) return &r;
  }
  return nullptr;
}

std::string CellResult::Name() const {
  if (control) return "control-L" + std::to_string(length);
  return "L" + std::to_string(length) + "-n" + std::to_string(n_rep);
}

ExperimentResult RunExperiment(const ExperimentConfig& config, EventLog& log) {
  Pipeline pipeline(config, log);
  return pipeline.Run();
}

}  // namespace trapkit
