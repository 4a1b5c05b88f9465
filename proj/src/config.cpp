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

#include "dffrec/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>

#include "dffrec/error.hpp"

namespace dffrec {
namespace {

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string FormatFloat(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string FormatFloat(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T ParseNumber(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw UsageError("expected a number, got '" + text + "'");
  }
  return value;
}

std::size_t ParseSize(const std::string& text) {
  return ParseNumber<std::size_t>(text);
}

bool ParseBool(const std::string& text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  throw UsageError("expected true/false, got '" + text + "'");
}

template <typename T, typename Parse>
std::vector<T> ParseList(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    out.push_back(parse(item));
  }
  return out;
}

template <typename T, typename Format>
std::string FormatList(const std::vector<T>& values, Format format) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += format(values[i]);
  }
  return out;
}

std::string SizeToString(std::size_t v) { return std::to_string(v); }

template <typename C>
struct Field {
  std::string key;
  std::function<std::string(const C&)> get;
  std::function<void(C&, const std::string&)> set;
};

#define DFF_FIELD(key, expr_get, stmt_set)                                    \
  Field<C> {                                                                  \
    key, [](const C& c) -> std::string { return expr_get; },                  \
        [](C& c, const std::string& v) { stmt_set; }                          \
  }

const std::vector<Field<RunConfig>>& RunFields() {
  using C = RunConfig;
  static const std::vector<Field<C>> fields = {
      DFF_FIELD("paths.store", c.store_path, c.store_path = v),
      DFF_FIELD("paths.log", c.log_path, c.log_path = v),
      DFF_FIELD("paths.caption_store", c.caption_store_path,
                c.caption_store_path = v),
      DFF_FIELD("paths.output_dir", c.output_dir, c.output_dir = v),
      DFF_FIELD("seed", std::to_string(c.seed),
                c.seed = ParseNumber<std::uint64_t>(v)),
      DFF_FIELD("model.d", SizeToString(c.model.fusion.d),
                c.model.fusion.d = c.model.backbone.d = ParseSize(v)),
      DFF_FIELD("fusion.strategy", StrategyName(c.model.fusion.strategy),
                c.model.fusion.strategy = ParseStrategy(v)),
      DFF_FIELD("fusion.aggregation",
                AggregationName(c.model.fusion.aggregation),
                c.model.fusion.aggregation = ParseAggregation(v)),
      DFF_FIELD("fusion.layer", SizeToString(c.model.fusion.layer),
                c.model.fusion.layer = ParseSize(v)),
      DFF_FIELD("fusion.gate", GateShapeName(c.model.fusion.gate),
                c.model.fusion.gate = ParseGateShape(v)),
      DFF_FIELD("backbone.num_blocks", SizeToString(c.model.backbone.num_blocks),
                c.model.backbone.num_blocks = ParseSize(v)),
      DFF_FIELD("backbone.num_heads", SizeToString(c.model.backbone.num_heads),
                c.model.backbone.num_heads = ParseSize(v)),
      DFF_FIELD("backbone.max_seq_len",
                SizeToString(c.model.backbone.max_seq_len),
                c.model.backbone.max_seq_len = ParseSize(v)),
      DFF_FIELD("backbone.dropout", FormatFloat(c.model.backbone.dropout),
                c.model.backbone.dropout = ParseNumber<float>(v)),
      DFF_FIELD("train.learning_rate", FormatFloat(c.schedule.learning_rate),
                c.schedule.learning_rate = ParseNumber<float>(v)),
      DFF_FIELD("train.lr_grid",
                FormatList(c.schedule.lr_grid,
                           [](float x) { return FormatFloat(x); }),
                c.schedule.lr_grid = ParseList<float>(
                    v, [](const std::string& s) { return ParseNumber<float>(s); })),
      DFF_FIELD("train.d_grid", FormatList(c.schedule.d_grid, SizeToString),
                c.schedule.d_grid = ParseList<std::size_t>(v, ParseSize)),
      DFF_FIELD("train.weight_decay", FormatFloat(c.schedule.weight_decay),
                c.schedule.weight_decay = ParseNumber<float>(v)),
      DFF_FIELD("train.batch_size", SizeToString(c.schedule.batch_size),
                c.schedule.batch_size = ParseSize(v)),
      DFF_FIELD("train.patience", std::to_string(c.schedule.patience),
                c.schedule.patience = ParseNumber<int>(v)),
      DFF_FIELD("train.max_epochs", std::to_string(c.schedule.max_epochs),
                c.schedule.max_epochs = ParseNumber<int>(v)),
      DFF_FIELD("train.layer_logit_lr_scale",
                FormatFloat(c.schedule.layer_logit_lr_scale),
                c.schedule.layer_logit_lr_scale = ParseNumber<float>(v)),
      DFF_FIELD("train.sampled_negatives",
                SizeToString(c.schedule.sampled_negatives),
                c.schedule.sampled_negatives = ParseSize(v)),
      DFF_FIELD("eval.exclude_history",
                c.eval.exclude_history ? "true" : "false",
                c.eval.exclude_history = ParseBool(v)),
      DFF_FIELD("eval.cutoffs", FormatList(c.eval.cutoffs, SizeToString),
                c.eval.cutoffs = ParseList<std::size_t>(v, ParseSize)),
  };
  return fields;
}

const std::vector<Field<SynthSpec>>& SynthFields() {
  using C = SynthSpec;
  static const std::vector<Field<C>> fields = {
      DFF_FIELD("num_users", SizeToString(c.num_users),
                c.num_users = ParseSize(v)),
      DFF_FIELD("num_items", SizeToString(c.num_items),
                c.num_items = ParseSize(v)),
      DFF_FIELD("num_topics", SizeToString(c.num_topics),
                c.num_topics = ParseSize(v)),
      DFF_FIELD("catalog_seed", std::to_string(c.catalog_seed),
                c.catalog_seed = ParseNumber<std::uint64_t>(v)),
      DFF_FIELD("num_layers", SizeToString(c.num_layers),
                c.num_layers = ParseSize(v)),
      DFF_FIELD("dim", SizeToString(c.dim), c.dim = ParseSize(v)),
      DFF_FIELD("signal_layers", FormatList(c.signal_layers, SizeToString),
                c.signal_layers = ParseList<std::size_t>(v, ParseSize)),
      DFF_FIELD("split_signal", c.split_signal ? "true" : "false",
                c.split_signal = ParseBool(v)),
      DFF_FIELD("content_strength", FormatFloat(c.content_strength),
                c.content_strength = ParseNumber<double>(v)),
      DFF_FIELD("collaborative_strength", FormatFloat(c.collaborative_strength),
                c.collaborative_strength = ParseNumber<double>(v)),
      DFF_FIELD("noise_scale", FormatFloat(c.noise_scale),
                c.noise_scale = ParseNumber<double>(v)),
      DFF_FIELD("min_seq_len", SizeToString(c.min_seq_len),
                c.min_seq_len = ParseSize(v)),
      DFF_FIELD("max_seq_len", SizeToString(c.max_seq_len),
                c.max_seq_len = ParseSize(v)),
      DFF_FIELD("item_spread", FormatFloat(c.item_spread),
                c.item_spread = ParseNumber<double>(v)),
      DFF_FIELD("user_spread", FormatFloat(c.user_spread),
                c.user_spread = ParseNumber<double>(v)),
      DFF_FIELD("collaborative_rank", SizeToString(c.collaborative_rank),
                c.collaborative_rank = ParseSize(v)),
      DFF_FIELD("caption_noise", FormatFloat(c.caption_noise),
                c.caption_noise = ParseNumber<double>(v)),
  };
  return fields;
}

#undef DFF_FIELD

template <typename C>
void Assign(const std::vector<Field<C>>& fields, C& target,
            const std::string& key, const std::string& value) {
  for (const auto& f : fields) {
    if (f.key == key) {
      f.set(target, value);
      return;
    }
  }
  throw UsageError("unknown key '" + key + "'");
}

template <typename C>
void ParseInto(const std::vector<Field<C>>& fields, C& target,
               const std::string& text, const std::string& origin) {
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      throw UsageError(where + ": expected 'key = value', got '" + trimmed +
                       "'");
    }
    const std::string key = Trim(std::string_view(trimmed).substr(0, eq));
    const std::string value = Trim(std::string_view(trimmed).substr(eq + 1));
    try {
      Assign(fields, target, key, value);
    } catch (const UsageError& e) {
      throw UsageError(where + ": " + e.what());
    }
  }
}

template <typename C>
std::vector<std::pair<std::string, std::string>> Entries(
    const std::vector<Field<C>>& fields, const C& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields) out.emplace_back(f.key, f.get(c));
  return out;
}

std::string EntriesToText(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  model.fusion.d = model.backbone.d = 32;
  model.backbone.max_seq_len = 20;
  schedule.batch_size = 32;
  schedule.layer_logit_lr_scale = 10.0F;
}

std::vector<std::pair<std::string, std::string>> ConfigEntries(
    const RunConfig& config) {
  return Entries(RunFields(), config);
}

std::string ConfigToText(const RunConfig& config) {
  return EntriesToText(ConfigEntries(config));
}

RunConfig ParseRunConfig(const std::string& text, const std::string& origin) {
  RunConfig config;
  ParseInto(RunFields(), config, text, origin);
  return config;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  return ParseRunConfig(ReadTextFile(path), path.string());
}

void ApplyConfigOverride(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw UsageError("override must be key=value, got '" + assignment + "'");
  }
  Assign(RunFields(), config, Trim(assignment.substr(0, eq)),
         Trim(assignment.substr(eq + 1)));
}

std::vector<std::pair<std::string, std::string>> SynthEntries(
    const SynthSpec& spec) {
  return Entries(SynthFields(), spec);
}

std::string SynthSpecToText(const SynthSpec& spec) {
  return EntriesToText(SynthEntries(spec));
}

SynthSpec ParseSynthSpec(const std::string& text, const std::string& origin) {
  SynthSpec spec;
  ParseInto(SynthFields(), spec, text, origin);
  ValidateSynthSpec(spec);
  return spec;
}

SynthSpec LoadSynthSpec(const std::filesystem::path& path) {
  return ParseSynthSpec(ReadTextFile(path), path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace dffrec
