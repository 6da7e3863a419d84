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

#ifndef TRAPKIT_EVENT_LOG_H_
#define TRAPKIT_EVENT_LOG_H_

#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string_view>

#include "json.hpp"

namespace trapkit {

// Line-delimited JSON events: {"ts": ..., "event": ..., <fields>}.
// Thread-safe. Either sink may be absent.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::ostream* echo) : echo_(echo) {}

  // Appends to `path` from now on; creates parent directories.
  void OpenFile(const std::filesystem::path& path);

  void Emit(std::string_view event, nlohmann::json fields = nlohmann::json::object());

 private:
  std::mutex mu_;
  std::ostream* echo_ = nullptr;
  std::ofstream file_;
};

}  // namespace trapkit

#endif  // TRAPKIT_EVENT_LOG_H_
