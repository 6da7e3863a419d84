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

#include "trapkit/event_log.h"

#include <chrono>
#include <ctime>

#include "trapkit/error.h"

namespace trapkit {

namespace {

std::string UtcTimestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t secs = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace

void EventLog::OpenFile(const std::filesystem::path& path) {
  std::lock_guard<std::mutex> lock(mu_);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  file_.open(path, std::ios::app);
  if (!file_) throw Error(ErrorCode::kData, "cannot open log " + path.string());
}

void EventLog::Emit(std::string_view event, nlohmann::json fields) {
  nlohmann::json line = {{"ts", UtcTimestamp()}, {"event", event}};
  for (auto& [k, v] : fields.items()) line[k] = v;
  const std::string text =
      line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard<std::mutex> lock(mu_);
  if (echo_) *echo_ << text << '\n' << std::flush;
  if (file_.is_open()) file_ << text << '\n' << std::flush;
}

}  // namespace trapkit
