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

#include "dffrec/interaction_log.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "dffrec/error.hpp"

namespace dffrec {
namespace {

template <typename T>
T ParseField(std::string_view field, const std::filesystem::path& path,
             std::size_t line_no) {
  T value{};
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError(path.string() + ":" + std::to_string(line_no) +
                    ": malformed field '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

void InteractionLog::Append(std::uint64_t user_id, std::uint64_t item_id,
                            std::int64_t timestamp) {
  auto& times = timestamps_[user_id];
  if (!times.empty() && timestamp < times.back()) {
    throw DataError("timestamps decrease for user " + std::to_string(user_id));
  }
  times.push_back(timestamp);
  items_[user_id].push_back(item_id);
  ++num_events_;
}

InteractionLog InteractionLog::ReadTsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction log " + path.string());
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view view(line);
    const auto t1 = view.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : view.find('\t', t1 + 1);
    if (t2 == std::string_view::npos ||
        view.find('\t', t2 + 1) != std::string_view::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 3 tab-separated fields");
    }
    const auto user = ParseField<std::uint64_t>(view.substr(0, t1), path, line_no);
    const auto item =
        ParseField<std::uint64_t>(view.substr(t1 + 1, t2 - t1 - 1), path, line_no);
    const auto ts = ParseField<std::int64_t>(view.substr(t2 + 1), path, line_no);
    try {
      log.Append(user, item, ts);
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return log;
}

void InteractionLog::WriteTsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write interaction log " + path.string());
  for (const auto& [user, items] : items_) {
    const auto& times = timestamps_.at(user);
    for (std::size_t i = 0; i < items.size(); ++i) {
      out << user << '\t' << items[i] << '\t' << times[i] << '\n';
    }
  }
  if (!out) throw DataError("failed writing interaction log " + path.string());
}

std::set<std::uint64_t> InteractionLog::DistinctItems() const {
  std::set<std::uint64_t> out;
  for (const auto& [user, items] : items_) out.insert(items.begin(), items.end());
  return out;
}

}  // namespace dffrec
