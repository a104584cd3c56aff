#pragma once

#include "xlt/corpus.hpp"
#include "xlt/translate.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace xlt {

struct SyntheticSpec {
  double overlap = 0.0;  // fraction of lexicon entries whose surface form is shared
  double noise = 0.0;    // per-keyword corruption probability of the fake translators
  std::size_t size = 1000;  // parallel examples per language, before the 75/25 split
  std::uint64_t seed = 0;
  std::string lang_a = "sa";
  std::string lang_b = "sb";

  void validate() const;
};

/// Two parallel synthetic languages plus dictionaries for the fake
/// translators "g" and "a". Each label has three keyword forms; a text's
/// labels are the concepts whose keywords it contains. Provider "g" never
/// produces a concept's third form and provider "a" never its second, so
/// their union covers more of the target language than either alone.
struct SyntheticBenchmark {
  SyntheticSpec spec;
  Dataset train_a, test_a, train_b, test_b;
  std::vector<FakeDictionary> dictionaries_g;
  std::vector<FakeDictionary> dictionaries_a;

  const Dataset& train(const std::string& lang) const;
  const Dataset& test(const std::string& lang) const;
  /// FNV-1a over the JSONL of all four datasets.
  std::uint64_t checksum() const;
};

inline constexpr std::size_t kSyntheticForms = 3;
inline constexpr std::size_t kSyntheticFillers = 40;

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticSpec& spec);

/// Fake provider "g" or "a" for the benchmark, with the benchmark's noise.
std::unique_ptr<FakeProvider> synthetic_provider(const SyntheticBenchmark& bench, const std::string& id);

/// Writes {lang}.{train,test}.jsonl and provider_{id}.json into dir.
void save_synthetic_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

}  // namespace xlt
