/*
 * Copyright 2026 The DFFRec Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

namespace dffrec {

struct Interaction {
  std::uint64_t user_id = 0;
  std::uint64_t item_id = 0;
  std::int64_t timestamp = 0;
};

// Time-ordered per-user event sequences. On disk: one UTF-8 line per event,
// `user_id \t item_id \t timestamp`, timestamps non-decreasing per user.
class InteractionLog {
 public:
  // Throws DataError if the timestamp goes backwards for the user.
  void Append(std::uint64_t user_id, std::uint64_t item_id,
              std::int64_t timestamp);

  static InteractionLog ReadTsv(const std::filesystem::path& path);
  void WriteTsv(const std::filesystem::path& path) const;

  // Items per user in time order.
  const std::map<std::uint64_t, std::vector<std::uint64_t>>& sequences()
      const {
    return items_;
  }
  std::set<std::uint64_t> DistinctItems() const;
  std::size_t num_events() const { return num_events_; }
  bool empty() const { return num_events_ == 0; }

 private:
  std::map<std::uint64_t, std::vector<std::uint64_t>> items_;
  std::map<std::uint64_t, std::vector<std::int64_t>> timestamps_;
  std::size_t num_events_ = 0;
};

}  // namespace dffrec
