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

#include "trapkit/corpus.h"

#include <set>
#include <variant>

#include "trapkit/error.h"
#include "trapkit/parallel.h"
#include "trapkit/rng.h"
#include "trapkit/util.h"

namespace trapkit {

using nlohmann::json;

std::string RoleName(Role role) {
  switch (role) {
    case Role::kUnassigned: return "unassigned";
    case Role::kMemberClean: return "member_clean";
    case Role::kNonmemberClean: return "nonmember_clean";
    case Role::kMemberInjected: return "member_injected";
  }
  return "unassigned";
}

Role ParseRole(std::string_view name) {
  for (Role r : {Role::kUnassigned, Role::kMemberClean, Role::kNonmemberClean,
                 Role::kMemberInjected}) {
    if (RoleName(r) == name) return r;
  }
  throw Error(ErrorCode::kData, "unknown role '" + std::string(name) + "'");
}

IngestResult Ingest(const std::vector<std::filesystem::path>& paths,
                    const Provider& reference, size_t min_tokens,
                    int workers) {
  using Outcome = std::variant<DocumentRecord, Exclusion>;
  const auto outcomes = ParallelMap<Outcome>(
      paths.size(), workers, [&](size_t i) -> Outcome {
        const auto& path = paths[i];
        std::string text;
        try {
          text = ReadFile(path);
        } catch (const Error& e) {
          return Exclusion{path, std::string("unreadable: ") + e.what()};
        }
        if (text.empty()) return Exclusion{path, "empty file"};
        if (!IsValidUtf8(text)) return Exclusion{path, "not valid UTF-8"};
        DocumentRecord rec;
        rec.doc_id = path.stem().string();
        rec.path = path;
        rec.sha256 = Sha256Hex(text);
        rec.token_count = reference.Tokenize(text).size();
        rec.provider_id = reference.id();
        if (rec.token_count < min_tokens) {
          return Exclusion{path, std::to_string(rec.token_count) +
                                     " tokens, below the minimum of " +
                                     std::to_string(min_tokens)};
        }
        return rec;
      });
  IngestResult out;
  std::set<std::string> ids;
  for (const auto& o : outcomes) {
    if (const auto* ex = std::get_if<Exclusion>(&o)) {
      out.excluded.push_back(*ex);
      continue;
    }
    const auto& rec = std::get<DocumentRecord>(o);
    if (!ids.insert(rec.doc_id).second) {
      out.excluded.push_back({rec.path, "duplicate document id '" + rec.doc_id + "'"});
      continue;
    }
    out.accepted.push_back(rec);
  }
  return out;
}

void SplitRoles(std::vector<DocumentRecord>& records, size_t n_members,
                size_t n_nonmembers, size_t n_injected, uint64_t seed) {
  std::vector<size_t> free;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].role == Role::kUnassigned) free.push_back(i);
  }
  const size_t wanted = n_members + n_nonmembers + n_injected;
  if (wanted > free.size()) {
    throw InputError("role split needs " + std::to_string(wanted) +
                     " unassigned documents, only " +
                     std::to_string(free.size()) + " available");
  }
  SplitMix64 rng(seed);
  const auto picked = rng.SampleWithoutReplacement(free.size(), wanted);
  for (size_t i = 0; i < picked.size(); ++i) {
    Role role = i < n_members                  ? Role::kMemberClean
                : i < n_members + n_nonmembers ? Role::kNonmemberClean
                                               : Role::kMemberInjected;
    records[free[picked[i]]].role = role;
  }
}

void ExperimentManifest::AssignTrap(const std::string& doc_id,
                                    const std::string& trap_id) {
  for (auto& d : documents) {
    if (d.doc_id != doc_id) continue;
    if (d.role != Role::kMemberInjected) {
      throw InputError("document '" + doc_id + "' has role " +
                       RoleName(d.role) + ", not member_injected");
    }
    if (d.trap_id) {
      throw InputError("document '" + doc_id + "' already holds trap '" +
                       *d.trap_id + "'");
    }
    d.trap_id = trap_id;
    return;
  }
  throw InputError("unknown document '" + doc_id + "'");
}

std::vector<std::string> ExperimentManifest::VerifyHashes() const {
  std::vector<std::string> changed;
  for (const auto& d : documents) {
    try {
      if (Sha256Hex(ReadFile(d.path)) != d.sha256) changed.push_back(d.doc_id);
    } catch (const Error&) {
      changed.push_back(d.doc_id);
    }
  }
  return changed;
}

std::string ManifestId(const json& config) {
  return Sha256Hex(config.dump()).substr(0, 16);
}

json ToJson(const DocumentRecord& r) {
  return json{{"doc_id", r.doc_id},
              {"path", r.path.string()},
              {"sha256", r.sha256},
              {"token_count", r.token_count},
              {"provider_id", r.provider_id},
              {"role", RoleName(r.role)},
              {"trap_id", r.trap_id ? json(*r.trap_id) : json(nullptr)}};
}

DocumentRecord DocumentRecordFromJson(const json& j) {
  DocumentRecord r;
  r.doc_id = j.at("doc_id").get<std::string>();
  r.path = j.at("path").get<std::string>();
  r.sha256 = j.at("sha256").get<std::string>();
  r.token_count = j.at("token_count").get<size_t>();
  r.provider_id = j.at("provider_id").get<std::string>();
  r.role = ParseRole(j.at("role").get<std::string>());
  if (!j.at("trap_id").is_null()) r.trap_id = j["trap_id"].get<std::string>();
  return r;
}

json ToJson(const ExperimentManifest& m) {
  json docs = json::array();
  for (const auto& d : m.documents) docs.push_back(ToJson(d));
  return json{{"format", "trapkit.manifest"},
              {"version", 1},
              {"id", m.id},
              {"providers",
               {{"target", m.target_provider}, {"reference", m.reference_provider}}},
              {"trap_sets", m.trap_sets},
              {"documents", docs},
              {"seeds", m.seeds},
              {"config", m.config}};
}

ExperimentManifest ManifestFromJson(const json& j) {
  try {
    if (j.value("format", "") != "trapkit.manifest") {
      throw Error(ErrorCode::kData, "not a trapkit manifest");
    }
    ExperimentManifest m;
    m.id = j.at("id").get<std::string>();
    m.target_provider = j.at("providers").at("target").get<std::string>();
    m.reference_provider = j.at("providers").at("reference").get<std::string>();
    m.trap_sets = j.at("trap_sets").get<std::vector<std::string>>();
    for (const auto& d : j.at("documents")) {
      m.documents.push_back(DocumentRecordFromJson(d));
    }
    m.seeds = j.at("seeds");
    m.config = j.at("config");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kData, std::string("malformed manifest: ") + e.what());
  }
}

void WriteManifest(const std::filesystem::path& path,
                   const ExperimentManifest& manifest) {
  WriteFile(path, ToJson(manifest).dump(2) + "\n");
}

ExperimentManifest ReadManifest(const std::filesystem::path& path) {
  json j = json::parse(ReadFile(path), nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kData, path.string() + " is not valid JSON");
  }
  return ManifestFromJson(j);
}

}  // namespace trapkit
