#include "xlt/corpus.hpp"

#include "xlt/errors.hpp"
#include "xlt/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace xlt {

using nlohmann::json;

std::optional<std::size_t> label_index(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> LabelSet::names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (test(i)) out.emplace_back(kLabelNames[i]);
  }
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unsplit: return "unsplit";
  }
  return "unsplit";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  if (text == "unsplit") return Split::unsplit;
  throw ConfigError("unknown split tag: " + std::string(text));
}

namespace {

void validate(const Example& e) {
  if (e.id.empty()) throw DataError("example with empty id");
  if (e.text.empty()) throw DataError("example " + e.id + " has empty text");
  if (e.lang.empty()) throw DataError("example " + e.id + " has empty lang");
  if (e.origin.is_translated()) {
    if (e.origin.provider.empty() || e.origin.source_lang.empty()) {
      throw DataError("translated example " + e.id + " lacks provider or source_lang");
    }
    if (e.origin.source_lang == e.lang) {
      throw DataError("translated example " + e.id + " has source_lang equal to lang");
    }
  }
}

}  // namespace

Dataset::Dataset(std::vector<Example> examples, Split split)
    : examples_(std::move(examples)), split_(split) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(examples_.size());
  for (const auto& e : examples_) {
    validate(e);
    if (!seen.insert(e.id).second) throw DataError("duplicate id: " + e.id);
  }
}

std::vector<std::string> Dataset::texts() const {
  std::vector<std::string> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) out.push_back(e.text);
  return out;
}

std::vector<LabelSet> Dataset::labels() const {
  std::vector<LabelSet> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) out.push_back(e.labels);
  return out;
}

std::string to_jsonl_line(const Example& e) {
  json j;
  j["id"] = e.id;
  j["lang"] = e.lang;
  j["text"] = e.text;
  j["labels"] = e.labels.names();
  if (e.origin.is_translated()) {
    j["origin"] = {{"kind", "translated"},
                   {"provider", e.origin.provider},
                   {"source_lang", e.origin.source_lang}};
  } else {
    j["origin"] = {{"kind", "original"}};
  }
  return j.dump();
}

Example parse_jsonl_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& err) {
    throw DataError(std::string("malformed JSON: ") + err.what());
  }
  if (!j.is_object()) throw DataError("record is not a JSON object");
  auto string_field = [&j](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw DataError(std::string("missing or non-string field '") + key + "'");
    }
    return it->get<std::string>();
  };

  Example e;
  e.id = string_field("id");
  e.lang = string_field("lang");
  e.text = string_field("text");

  auto labels = j.find("labels");
  if (labels == j.end() || !labels->is_array()) throw DataError("missing 'labels' array");
  for (const auto& item : *labels) {
    if (!item.is_string()) throw DataError("non-string label");
    const auto name = item.get<std::string>();
    const auto idx = label_index(name);
    if (!idx) throw DataError("unknown label '" + name + "'");
    e.labels.set(*idx);
  }

  auto origin = j.find("origin");
  if (origin != j.end()) {
    if (!origin->is_object()) throw DataError("'origin' must be an object");
    const auto kind = origin->value("kind", std::string{});
    if (kind == "translated") {
      e.origin = Origin::translated(origin->value("provider", std::string{}),
                                    origin->value("source_lang", std::string{}));
    } else if (kind != "original") {
      throw DataError("unknown origin kind '" + kind + "'");
    }
  }
  validate(e);
  return e;
}

std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& e : dataset) {
    out += to_jsonl_line(e);
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(std::string_view jsonl, Split split) {
  std::vector<Example> examples;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      examples.push_back(parse_jsonl_line(line));
    } catch (const DataError& err) {
      throw DataError("line " + std::to_string(line_no) + ": " + err.what());
    }
    if (!seen.insert(examples.back().id).second) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate id '" +
                      examples.back().id + "'");
    }
  }
  return Dataset(std::move(examples), split);
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_dataset(buf.str(), split);
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  out << to_jsonl(dataset);
}

CorpusStats compute_stats(const Dataset& dataset) {
  CorpusStats stats;
  stats.n_examples = dataset.size();
  std::size_t total = 0;
  for (const auto& e : dataset) {
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      if (e.labels.test(i)) ++stats.per_label_counts[i];
    }
    const auto c = e.labels.count();
    total += c;
    if (c == 0) ++stats.n_no_label;
  }
  stats.mean_labels_per_example =
      stats.n_examples == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(stats.n_examples);
  return stats;
}

std::string format_stats_row(std::string_view name, const CorpusStats& s) {
  std::ostringstream out;
  out << name << '\t' << s.n_examples << '\t';
  out.setf(std::ios::fixed);
  out.precision(3);
  out << s.mean_labels_per_example;
  for (auto c : s.per_label_counts) out << '\t' << c;
  out << '\t' << s.n_no_label;
  return out.str();
}

Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("subsample fraction must lie in [0,1], got " + std::to_string(fraction));
  }
  const std::size_t n = dataset.size();
  // The small slack keeps e.g. 0.29 * 100 from flooring to 28.
  auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  k = std::min(k, n);
  if (k == n) return dataset;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(hash_mix(seed, 0x5ab5a3b1eULL));
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(k);
  std::sort(order.begin(), order.end());

  std::vector<Example> picked;
  picked.reserve(k);
  for (auto i : order) picked.push_back(dataset[i]);
  return Dataset(std::move(picked), dataset.split());
}

Dataset mix(std::span<const Dataset> parts) {
  if (parts.empty()) return Dataset{};
  std::vector<Example> all;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  all.reserve(total);
  std::unordered_set<std::string> seen;
  for (const auto& p : parts) {
    for (const auto& e : p) {
      if (!seen.insert(e.id).second) throw DataError("id collision while mixing: " + e.id);
      all.push_back(e);
    }
  }
  const Split split = parts.front().split();
  return Dataset(std::move(all), split);
}

}  // namespace xlt
