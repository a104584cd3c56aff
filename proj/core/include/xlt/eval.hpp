#pragma once

#include "xlt/corpus.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace xlt {

struct MetricsReport {
  double exact_match = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumLabels> per_label_f1{};
  std::size_t n = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
};

struct AggregateReport {
  MetricSummary exact_match;
  MetricSummary macro_f1;
  std::array<MetricSummary, kNumLabels> per_label_f1{};
  std::size_t runs = 0;
  std::vector<std::uint64_t> seeds;  // sorted
};

/// Fraction of positions whose full 8-label sets are identical.
double exact_match(std::span<const LabelSet> preds, std::span<const LabelSet> golds);

/// Per-label F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0; macro
/// is their unweighted mean. exact_match is left at 0.
MetricsReport macro_f1(std::span<const LabelSet> preds, std::span<const LabelSet> golds);

/// Both metrics.
MetricsReport evaluate(std::span<const LabelSet> preds, std::span<const LabelSet> golds);

/// Mean and sample std per metric. Values are summed in sorted order, so the
/// result does not depend on the order of runs.
AggregateReport aggregate(std::span<const MetricsReport> runs,
                          std::span<const std::uint64_t> seeds = {});

/// Predicts the same LabelSet for every input.
class ConstantPredictor {
 public:
  explicit ConstantPredictor(LabelSet value) : value_(value) {}
  LabelSet predict(std::size_t /*index*/) const { return value_; }
  std::vector<LabelSet> predict_n(std::size_t n) const { return std::vector<LabelSet>(n, value_); }
  LabelSet value() const { return value_; }

 private:
  LabelSet value_;
};

/// Independent Bernoulli per label with the training frequency as p. The
/// variate for (index, label) is a hash of (seed, index, label).
class RandomPredictor {
 public:
  RandomPredictor(std::array<double, kNumLabels> frequencies, std::uint64_t seed)
      : freq_(frequencies), seed_(seed) {}
  LabelSet predict(std::size_t index) const;
  std::vector<LabelSet> predict_n(std::size_t n) const;
  const std::array<double, kNumLabels>& frequencies() const { return freq_; }

 private:
  std::array<double, kNumLabels> freq_;
  std::uint64_t seed_;
};

/// Per-label majority: a label is predicted iff it is positive in more than
/// half of the training examples. Throws DataError on an empty set.
ConstantPredictor majority_baseline(const Dataset& train);
RandomPredictor random_baseline(const Dataset& train, std::uint64_t seed);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const AggregateReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
AggregateReport aggregate_from_json(const nlohmann::json& j);

}  // namespace xlt
