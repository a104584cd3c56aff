#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xlt {

inline constexpr std::size_t kNumLabels = 8;

/// Canonical label order. Serialization, metrics and the classifier head all
/// index labels by this order.
inline constexpr std::array<std::string_view, kNumLabels> kLabelNames{
    "influenza", "diarrhoea", "hay_fever", "cough",
    "headache",  "fever",     "runny_nose", "cold"};

std::optional<std::size_t> label_index(std::string_view name);

/// The 8 binary symptom labels of one pseudo-tweet, packed into a byte.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  static constexpr LabelSet from_mask(std::uint8_t mask) {
    LabelSet s;
    s.bits_ = mask;
    return s;
  }

  constexpr bool test(std::size_t i) const { return (bits_ >> i) & 1U; }
  constexpr void set(std::size_t i, bool on = true) {
    if (on) {
      bits_ = static_cast<std::uint8_t>(bits_ | (1U << i));
    } else {
      bits_ = static_cast<std::uint8_t>(bits_ & ~(1U << i));
    }
  }
  constexpr std::uint8_t mask() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < kNumLabels; ++i) n += test(i) ? 1 : 0;
    return n;
  }
  std::vector<std::string> names() const;

  friend constexpr bool operator==(LabelSet a, LabelSet b) { return a.bits_ == b.bits_; }

 private:
  std::uint8_t bits_ = 0;
};

struct Origin {
  enum class Kind { original, translated };

  Kind kind = Kind::original;
  std::string provider;
  std::string source_lang;

  static Origin original() { return {}; }
  static Origin translated(std::string provider_id, std::string source) {
    return {Kind::translated, std::move(provider_id), std::move(source)};
  }
  bool is_translated() const { return kind == Kind::translated; }

  friend bool operator==(const Origin&, const Origin&) = default;
};

struct Example {
  std::string id;
  std::string lang;
  std::string text;
  LabelSet labels;
  Origin origin;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class Split { train, test, unsplit };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// Ordered, immutable collection of examples with unique ids.
class Dataset {
 public:
  Dataset() = default;
  /// Validates every example and rejects duplicate ids (DataError).
  Dataset(std::vector<Example> examples, Split split);

  const std::vector<Example>& examples() const { return examples_; }
  Split split() const { return split_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

  std::vector<std::string> texts() const;
  std::vector<LabelSet> labels() const;

 private:
  std::vector<Example> examples_;
  Split split_ = Split::unsplit;
};

struct CorpusStats {
  std::size_t n_examples = 0;
  std::array<std::size_t, kNumLabels> per_label_counts{};
  double mean_labels_per_example = 0.0;
  std::size_t n_no_label = 0;
};

// Canonical JSONL schema, one example per line.
std::string to_jsonl_line(const Example& example);
Example parse_jsonl_line(std::string_view line);
std::string to_jsonl(const Dataset& dataset);

Dataset load_dataset(const std::filesystem::path& path, Split split);
Dataset parse_dataset(std::string_view jsonl, Split split);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

CorpusStats compute_stats(const Dataset& dataset);
/// One Table-1 style row: n, mean (3 decimals), per-label counts, no-label count.
std::string format_stats_row(std::string_view name, const CorpusStats& stats);

/// floor(fraction * n) examples drawn uniformly without replacement; the
/// selected examples keep their original relative order.
Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

/// Concatenation in argument order. Ids must be pairwise disjoint.
Dataset mix(std::span<const Dataset> parts);

}  // namespace xlt
