#include "xlt/eval.hpp"

#include "xlt/errors.hpp"
#include "xlt/random.hpp"

#include <algorithm>
#include <cmath>

namespace xlt {

namespace {

void check_lengths(std::span<const LabelSet> preds, std::span<const LabelSet> golds) {
  if (preds.size() != golds.size()) {
    throw DataError("prediction/gold length mismatch: " + std::to_string(preds.size()) + " vs " +
                    std::to_string(golds.size()));
  }
  if (preds.empty()) throw DataError("cannot score empty prediction lists");
}

MetricSummary summarize(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  MetricSummary s;
  s.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / (n - 1.0));
  return s;
}

nlohmann::json summary_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

MetricSummary summary_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>()};
}

}  // namespace

double exact_match(std::span<const LabelSet> preds, std::span<const LabelSet> golds) {
  check_lengths(preds, golds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

MetricsReport macro_f1(std::span<const LabelSet> preds, std::span<const LabelSet> golds) {
  check_lengths(preds, golds);
  MetricsReport r;
  r.n = preds.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i].test(k);
      const bool g = golds[i].test(k);
      tp += (p && g) ? 1 : 0;
      fp += (p && !g) ? 1 : 0;
      fn += (!p && g) ? 1 : 0;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    r.per_label_f1[k] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    sum += r.per_label_f1[k];
  }
  r.macro_f1 = sum / static_cast<double>(kNumLabels);
  return r;
}

MetricsReport evaluate(std::span<const LabelSet> preds, std::span<const LabelSet> golds) {
  MetricsReport r = macro_f1(preds, golds);
  r.exact_match = exact_match(preds, golds);
  return r;
}

AggregateReport aggregate(std::span<const MetricsReport> runs, std::span<const std::uint64_t> seeds) {
  if (runs.size() < 2) throw DataError("aggregation needs at least 2 runs");
  if (!seeds.empty() && seeds.size() != runs.size()) throw DataError("seed count mismatch");
  AggregateReport a;
  a.runs = runs.size();
  auto collect = [&runs](auto field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(field(r));
    return v;
  };
  a.exact_match = summarize(collect([](const MetricsReport& r) { return r.exact_match; }));
  a.macro_f1 = summarize(collect([](const MetricsReport& r) { return r.macro_f1; }));
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    a.per_label_f1[k] = summarize(collect([k](const MetricsReport& r) { return r.per_label_f1[k]; }));
  }
  a.seeds.assign(seeds.begin(), seeds.end());
  std::sort(a.seeds.begin(), a.seeds.end());
  return a;
}

LabelSet RandomPredictor::predict(std::size_t index) const {
  LabelSet out;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double u = unit_from_bits(hash_mix(seed_, index, k, 0x7a9dULL));
    out.set(k, u < freq_[k]);
  }
  return out;
}

std::vector<LabelSet> RandomPredictor::predict_n(std::size_t n) const {
  std::vector<LabelSet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(predict(i));
  return out;
}

ConstantPredictor majority_baseline(const Dataset& train) {
  if (train.empty()) throw DataError("majority baseline needs a non-empty training set");
  const auto stats = compute_stats(train);
  LabelSet value;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    value.set(k, 2 * stats.per_label_counts[k] > stats.n_examples);
  }
  return ConstantPredictor(value);
}

RandomPredictor random_baseline(const Dataset& train, std::uint64_t seed) {
  if (train.empty()) throw DataError("random baseline needs a non-empty training set");
  const auto stats = compute_stats(train);
  std::array<double, kNumLabels> freq{};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    freq[k] = static_cast<double>(stats.per_label_counts[k]) / static_cast<double>(stats.n_examples);
  }
  return RandomPredictor(freq, seed);
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"exact_match", r.exact_match},
          {"macro_f1", r.macro_f1},
          {"per_label_f1", r.per_label_f1},
          {"n", r.n}};
}

nlohmann::json to_json(const AggregateReport& a) {
  nlohmann::json per_label = nlohmann::json::array();
  for (const auto& s : a.per_label_f1) per_label.push_back(summary_json(s));
  return {{"exact_match", summary_json(a.exact_match)},
          {"macro_f1", summary_json(a.macro_f1)},
          {"per_label_f1", per_label},
          {"runs", a.runs},
          {"seeds", a.seeds}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.exact_match = j.at("exact_match").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.per_label_f1 = j.at("per_label_f1").get<std::array<double, kNumLabels>>();
  r.n = j.at("n").get<std::size_t>();
  return r;
}

AggregateReport aggregate_from_json(const nlohmann::json& j) {
  AggregateReport a;
  a.exact_match = summary_from_json(j.at("exact_match"));
  a.macro_f1 = summary_from_json(j.at("macro_f1"));
  const auto& per = j.at("per_label_f1");
  for (std::size_t k = 0; k < kNumLabels && k < per.size(); ++k) {
    a.per_label_f1[k] = summary_from_json(per[k]);
  }
  a.runs = j.at("runs").get<std::size_t>();
  a.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  return a;
}

}  // namespace xlt
