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

#ifndef TRAPKIT_UTIL_H_
#define TRAPKIT_UTIL_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

namespace trapkit {

bool IsValidUtf8(std::string_view text);

// Largest position <= pos that does not fall inside a UTF-8 multi-byte
// sequence.
size_t Utf8BoundaryAtOrBefore(std::string_view text, size_t pos);

// Lower-case hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

std::string ReadFile(const std::filesystem::path& path);

// Writes via a temporary file and rename so readers never see partial output.
void WriteFile(const std::filesystem::path& path, std::string_view contents);

// Number of (possibly overlapping) occurrences of `needle` in `haystack`.
size_t CountOccurrences(std::string_view haystack, std::string_view needle);

}  // namespace trapkit

#endif  // TRAPKIT_UTIL_H_
