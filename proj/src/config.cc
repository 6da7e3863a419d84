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

#include "trapkit/config.h"

#include <cmath>
#include <cstdlib>

#include "trapkit/error.h"
#include "trapkit/rng.h"

namespace trapkit {

using nlohmann::json;

namespace {

// Order fixes the derivation stream of each seed.
const std::vector<std::pair<std::string, uint64_t Seeds::*>>& SeedFields() {
  static const std::vector<std::pair<std::string, uint64_t Seeds::*>> fields = {
      {"split", &Seeds::split},
      {"generation", &Seeds::generation},
      {"nonmember_generation", &Seeds::nonmember_generation},
      {"control_generation", &Seeds::control_generation},
      {"injection", &Seeds::injection},
      {"mia", &Seeds::mia},
      {"eval", &Seeds::eval},
      {"training", &Seeds::training},
      {"toy_corpus", &Seeds::toy_corpus},
      {"toy_reference", &Seeds::toy_reference},
  };
  return fields;
}

json ProviderDefaults() {
  return {{"kind", "builtin"},        {"endpoint", ""},
          {"model_path", ""},         {"timeout_seconds", 60.0},
          {"max_parallel", 4},        {"passthrough", json::object()}};
}

[[noreturn]] void ConfigError(const std::string& path, const std::string& what) {
  Fail(ErrorCode::kConfig, "config field '" + path + "': " + what);
}

// Free-form maps whose keys are not checked.
bool IsOpenMap(const std::string& path) {
  return path.size() >= 12 && path.compare(path.size() - 12, 12, ".passthrough") == 0;
}

void MergeInto(json& base, const json& user, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) ConfigError(path, "unknown field");
    json& slot = base[key];
    if (slot.is_object() && !IsOpenMap(path)) {
      if (!value.is_object()) ConfigError(path, "expected an object");
      MergeInto(slot, value, path);
    } else {
      slot = value;
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& At(const std::string& path) const {
    const json* node = &root_;
    size_t start = 0;
    while (true) {
      const size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot - start);
      if (!node->is_object() || !node->contains(key)) ConfigError(path, "missing");
      node = &(*node)[key];
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }

  int64_t Int(const std::string& path, int64_t min, int64_t max) const {
    const json& v = At(path);
    if (!v.is_number_integer()) ConfigError(path, "expected an integer");
    if (v.is_number_unsigned() && v.get<uint64_t>() > static_cast<uint64_t>(max)) {
      ConfigError(path, "must be at most " + std::to_string(max));
    }
    const int64_t x = v.is_number_unsigned() ? static_cast<int64_t>(v.get<uint64_t>())
                                             : v.get<int64_t>();
    if (x < min) ConfigError(path, "must be at least " + std::to_string(min));
    if (x > max) ConfigError(path, "must be at most " + std::to_string(max));
    return x;
  }

  uint64_t Seed(const std::string& path) const {
    const json& v = At(path);
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer() && v.get<int64_t>() >= 0) return v.get<uint64_t>();
    ConfigError(path, "expected a non-negative integer seed");
  }

  double Number(const std::string& path) const {
    const json& v = At(path);
    if (!v.is_number()) ConfigError(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) ConfigError(path, "must be finite");
    return x;
  }

  double Positive(const std::string& path) const {
    const double x = Number(path);
    if (!(x > 0)) ConfigError(path, "must be positive");
    return x;
  }

  bool Bool(const std::string& path) const {
    const json& v = At(path);
    if (!v.is_boolean()) ConfigError(path, "expected true or false");
    return v.get<bool>();
  }

  std::string String(const std::string& path) const {
    const json& v = At(path);
    if (!v.is_string()) ConfigError(path, "expected a string");
    return v.get<std::string>();
  }

  const json& Array(const std::string& path, bool allow_empty) const {
    const json& v = At(path);
    if (!v.is_array()) ConfigError(path, "expected an array");
    if (!allow_empty && v.empty()) ConfigError(path, "must not be empty");
    return v;
  }

 private:
  const json& root_;
};

ProviderConfig ReadProvider(const Reader& r, const std::string& path) {
  ProviderConfig p;
  const std::string kind = r.String(path + ".kind");
  if (kind == "builtin") {
    p.kind = ProviderConfig::Kind::kBuiltin;
  } else if (kind == "remote") {
    p.kind = ProviderConfig::Kind::kRemote;
  } else {
    ConfigError(path + ".kind", "expected 'builtin' or 'remote'");
  }
  p.endpoint = r.String(path + ".endpoint");
  if (p.kind == ProviderConfig::Kind::kRemote && p.endpoint.empty()) {
    if (const char* env = std::getenv("TRAPKIT_ENDPOINT")) p.endpoint = env;
  }
  p.model_path = r.String(path + ".model_path");
  p.timeout_seconds = r.Positive(path + ".timeout_seconds");
  p.max_parallel = static_cast<int>(r.Int(path + ".max_parallel", 1, 1024));
  for (const auto& [key, value] : r.At(path + ".passthrough").items()) {
    p.passthrough[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  try {
    p.Validate();
  } catch (const Error& e) {
    ConfigError(path, e.what());
  }
  return p;
}

}  // namespace

json DefaultConfig() {
  json seeds = json::object();
  for (const auto& [name, _] : SeedFields()) seeds[name] = nullptr;
  return {
      {"seed", 0},
      {"workers", 1},
      {"out", "trapkit_out"},
      {"providers", {{"target", ProviderDefaults()}, {"reference", ProviderDefaults()}}},
      {"corpus",
       {{"paths", json::array()},
        {"min_tokens", 5000},
        {"n_members", 500},
        {"n_nonmembers", 500},
        {"n_injected", 7500}}},
      {"generation",
       {{"lengths", {25, 50, 100}},
        {"top_k", 50},
        {"temperatures", DefaultTemperatures()},
        {"quota_per_bucket", 50},
        {"buckets", {{"count", 10}, {"width", 10.0}, {"floor", 1.0}}},
        {"max_attempts", 0},
        {"control", true}}},
      {"injection", {{"n_rep", {1, 10, 100, 1000}}}},
      {"mia",
       {{"methods", {"loss", "min_k", "ratio", "ratio_ctx"}},
        {"k", kDefaultMinK},
        {"ctx_len", 100}}},
      {"doc_mia",
       {{"enabled", false},
        {"excerpt_len", 512},
        {"n_excerpts", 100},
        {"k", kDefaultMinK},
        {"calibration_fraction", 0.5}}},
      {"eval", {{"n_perm", 10000}, {"bootstrap", 1000}}},
      {"toy",
       {{"order", 4},
        {"alpha", 0.5},
        {"epochs", 1},
        {"checkpoint_every", 0},
        {"separate_runs", false},
        {"lexicon_seed", 0},
        {"lexicon_size", 2000},
        {"docs", 0},
        {"words_per_doc", 2000},
        {"reference_docs", 200}}},
      {"seeds", seeds},
  };
}

void ApplyAssignment(json& config, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    Fail(ErrorCode::kConfig, "expected key=value, got '" + std::string(assignment) + "'");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &config;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) ConfigError(path, "empty path component");
    if (!node->is_object()) ConfigError(path, "parent is not an object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json MergeWithDefaults(const json& user) {
  if (!user.is_object()) Fail(ErrorCode::kConfig, "configuration must be a JSON object");
  json merged = DefaultConfig();
  MergeInto(merged, user, "");
  return merged;
}

ExperimentConfig ParseConfig(const json& merged) {
  const Reader r(merged);
  ExperimentConfig c;
  constexpr int64_t kBig = int64_t{1} << 40;

  c.seed = r.Seed("seed");
  c.workers = static_cast<int>(r.Int("workers", 1, 1024));
  c.out = r.String("out");
  c.target = ReadProvider(r, "providers.target");
  c.reference = ReadProvider(r, "providers.reference");

  for (const auto& p : r.Array("corpus.paths", true)) {
    if (!p.is_string()) ConfigError("corpus.paths", "expected strings");
    c.corpus_paths.push_back(p.get<std::string>());
  }
  c.min_tokens = r.Int("corpus.min_tokens", 0, kBig);
  c.n_members = r.Int("corpus.n_members", 0, kBig);
  c.n_nonmembers = r.Int("corpus.n_nonmembers", 0, kBig);
  c.n_injected = r.Int("corpus.n_injected", 0, kBig);

  for (const auto& v : r.Array("generation.lengths", false)) {
    if (!v.is_number_integer() || v.get<int64_t>() < 1) {
      ConfigError("generation.lengths", "expected positive integers");
    }
    c.lengths.push_back(v.get<size_t>());
  }
  c.top_k = r.Int("generation.top_k", 1, kBig);
  for (const auto& v : r.Array("generation.temperatures", false)) {
    if (!v.is_number() || !(v.get<double>() > 0) || !std::isfinite(v.get<double>())) {
      ConfigError("generation.temperatures", "expected positive numbers");
    }
    c.temperatures.push_back(v.get<double>());
  }
  c.quota_per_bucket = static_cast<int>(r.Int("generation.quota_per_bucket", 1, 1 << 30));
  c.buckets.count = static_cast<int>(r.Int("generation.buckets.count", 1, 1 << 20));
  c.buckets.width = r.Positive("generation.buckets.width");
  c.buckets.floor = r.Number("generation.buckets.floor");
  if (c.buckets.floor < 1.0) ConfigError("generation.buckets.floor", "must be at least 1");
  c.max_attempts = r.Int("generation.max_attempts", 0, kBig);
  c.control = r.Bool("generation.control");

  for (const auto& v : r.Array("injection.n_rep", false)) {
    if (!v.is_number_integer() || v.get<int64_t>() < 1 || v.get<int64_t>() > (1 << 30)) {
      ConfigError("injection.n_rep", "expected positive integers");
    }
    c.n_reps.push_back(v.get<int>());
  }

  for (const auto& v : r.Array("mia.methods", false)) {
    if (!v.is_string()) ConfigError("mia.methods", "expected method names");
    try {
      const Method m = ParseMethod(v.get<std::string>());
      if (m == Method::kDocMinK) {
        ConfigError("mia.methods", "doc_min_k is configured under doc_mia");
      }
      c.methods.push_back(m);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      ConfigError("mia.methods", e.what());
    }
  }
  c.k = r.Positive("mia.k");
  if (c.k > 100) ConfigError("mia.k", "must be at most 100");
  c.ctx_len = r.Int("mia.ctx_len", 0, kBig);

  c.doc_mia.enabled = r.Bool("doc_mia.enabled");
  c.doc_mia.excerpt_len = r.Int("doc_mia.excerpt_len", 1, kBig);
  c.doc_mia.n_excerpts = r.Int("doc_mia.n_excerpts", 1, kBig);
  c.doc_mia.k = r.Positive("doc_mia.k");
  if (c.doc_mia.k > 100) ConfigError("doc_mia.k", "must be at most 100");
  c.doc_mia.calibration_fraction = r.Positive("doc_mia.calibration_fraction");
  if (c.doc_mia.calibration_fraction >= 1) {
    ConfigError("doc_mia.calibration_fraction", "must be below 1");
  }

  c.n_perm = static_cast<int>(r.Int("eval.n_perm", 0, 1 << 30));
  c.bootstrap = static_cast<int>(r.Int("eval.bootstrap", 0, 1 << 30));

  c.toy.order = static_cast<int>(r.Int("toy.order", 1, 16));
  c.toy.alpha = r.Positive("toy.alpha");
  c.toy.epochs = static_cast<int>(r.Int("toy.epochs", 1, 1 << 20));
  c.toy.checkpoint_every = r.Int("toy.checkpoint_every", 0, kBig);
  c.toy.separate_runs = r.Bool("toy.separate_runs");
  c.toy.lexicon_seed = r.Seed("toy.lexicon_seed");
  c.toy.lexicon_size = r.Int("toy.lexicon_size", 1, 1 << 24);
  c.toy.docs = r.Int("toy.docs", 0, kBig);
  c.toy.words_per_doc = r.Int("toy.words_per_doc", 1, kBig);
  c.toy.reference_docs = r.Int("toy.reference_docs", 0, kBig);

  c.echo = merged;
  for (size_t i = 0; i < SeedFields().size(); ++i) {
    const auto& [name, field] = SeedFields()[i];
    const std::string path = "seeds." + name;
    c.seeds.*field = r.At(path).is_null() ? DeriveSeed(c.seed, i + 1) : r.Seed(path);
    c.echo["seeds"][name] = c.seeds.*field;
  }
  c.echo["providers"]["target"]["endpoint"] = c.target.endpoint;
  c.echo["providers"]["reference"]["endpoint"] = c.reference.endpoint;
  return c;
}

}  // namespace trapkit
