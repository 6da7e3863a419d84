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

#ifndef TRAPKIT_CORPUS_H_
#define TRAPKIT_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trapkit/provider.h"

namespace trapkit {

enum class Role { kUnassigned, kMemberClean, kNonmemberClean, kMemberInjected };

std::string RoleName(Role role);
Role ParseRole(std::string_view name);  // throws kData

struct DocumentRecord {
  std::string doc_id;  // file stem
  std::filesystem::path path;
  std::string sha256;
  size_t token_count = 0;
  std::string provider_id;  // tokenizer behind token_count
  Role role = Role::kUnassigned;
  std::optional<std::string> trap_id;  // member_injected only
};

struct Exclusion {
  std::filesystem::path path;
  std::string reason;
};

struct IngestResult {
  std::vector<DocumentRecord> accepted;  // input order
  std::vector<Exclusion> excluded;
};

// Reads and tokenizes every path. Unreadable, non-UTF-8, duplicate-id and
// short (< min_tokens) files are excluded with a reason; the run continues.
IngestResult Ingest(const std::vector<std::filesystem::path>& paths,
                    const Provider& reference, size_t min_tokens,
                    int workers = 1);

// Assigns disjoint uniformly random subsets of unassigned records to the
// three roles. Throws kInput when there are too few unassigned records.
void SplitRoles(std::vector<DocumentRecord>& records, size_t n_members,
                size_t n_nonmembers, size_t n_injected, uint64_t seed);

struct ExperimentManifest {
  std::string id;
  std::string target_provider;
  std::string reference_provider;
  std::vector<std::string> trap_sets;  // paths of trap set files
  std::vector<DocumentRecord> documents;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();

  // Binds one trap to a member_injected document. Throws kInput when the
  // document is unknown, has another role, or already holds a trap.
  void AssignTrap(const std::string& doc_id, const std::string& trap_id);
  // Recomputes content hashes; returns ids of documents that changed or
  // became unreadable.
  std::vector<std::string> VerifyHashes() const;
};

// Stable id: the leading 16 hex digits of the SHA-256 of the config dump.
std::string ManifestId(const nlohmann::json& config);

nlohmann::json ToJson(const DocumentRecord& record);
DocumentRecord DocumentRecordFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const ExperimentManifest& manifest);
ExperimentManifest ManifestFromJson(const nlohmann::json& j);

void WriteManifest(const std::filesystem::path& path,
                   const ExperimentManifest& manifest);
ExperimentManifest ReadManifest(const std::filesystem::path& path);

}  // namespace trapkit

#endif  // TRAPKIT_CORPUS_H_
