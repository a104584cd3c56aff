#include "xlt/errors.hpp"
#include "xlt/harness.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace xlt {

namespace {

nlohmann::json optional_aggregate(const std::optional<AggregateReport>& a) {
  return a ? to_json(*a) : nlohmann::json(nullptr);
}

std::optional<AggregateReport> aggregate_or_null(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return aggregate_from_json(j);
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string cell(const MetricSummary* s, double single) {
  if (s == nullptr) return fixed3(single) + " (-)";
  return fixed3(s->mean) + " (" + fixed3(s->std) + ")";
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

std::string translation_label(const ExperimentConfig& c) {
  const std::size_t n = c.translation == TranslationSetting::x2 ? 2 : 1;
  std::vector<std::string> ids(c.providers.begin(), c.providers.begin() + static_cast<std::ptrdiff_t>(std::min(n, c.providers.size())));
  return "T(" + c.train_langs.front() + "->" + c.test_lang + ") " + to_string(c.translation) + "[" + join(ids, "+") + "]";
}

std::string percent(double f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g%%", f * 100.0);
  return buf;
}

using Row = std::vector<std::string>;

void add_metric_cells(Row& row, const std::optional<AggregateReport>& agg, const std::vector<MetricsReport>& runs) {
  if (agg) {
    row.push_back(cell(&agg->exact_match, 0.0));
    row.push_back(cell(&agg->macro_f1, 0.0));
  } else if (!runs.empty()) {
    row.push_back(cell(nullptr, runs.front().exact_match));
    row.push_back(cell(nullptr, runs.front().macro_f1));
  } else {
    row.push_back("-");
    row.push_back("-");
  }
}

}  // namespace

nlohmann::json ResultsReport::to_json(bool include_volatile) const {
  nlohmann::json j;
  j["config"] = xlt::to_json(config);
  j["complete"] = complete;
  j["error"] = error;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["vocab_size"] = vocab_size;
  j["token_overlap"] = token_overlap ? nlohmann::json(*token_overlap) : nlohmann::json(nullptr);
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : runs) {
    rs.push_back({{"seed", r.seed},
                  {"fraction", r.fraction ? nlohmann::json(*r.fraction) : nlohmann::json(nullptr)},
                  {"n_train", r.n_train},
                  {"metrics", xlt::to_json(r.metrics)},
                  {"final_loss", r.final_loss},
                  {"param_checksum", r.param_checksum}});
  }
  j["runs"] = rs;
  j["aggregate"] = optional_aggregate(aggregate);
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : fractions) {
    nlohmann::json runs_j = nlohmann::json::array();
    for (const auto& m : f.runs) runs_j.push_back(xlt::to_json(m));
    fs.push_back({{"fraction", f.fraction},
                  {"n_train", f.n_train},
                  {"runs", runs_j},
                  {"aggregate", optional_aggregate(f.aggregate)}});
  }
  j["fractions"] = fs;
  if (references) {
    nlohmann::json random = nlohmann::json::array();
    for (const auto& m : references->random) random.push_back(xlt::to_json(m));
    j["references"] = {{"majority", xlt::to_json(references->majority)},
                       {"random", random},
                       {"random_aggregate", optional_aggregate(references->random_aggregate)}};
  } else {
    j["references"] = nullptr;
  }
  if (include_volatile) {
    j["created_at"] = created_at;
    j["artifacts"] = artifacts;
  }
  return j;
}

ResultsReport results_from_json(const nlohmann::json& j) {
  ResultsReport r;
  try {
    r.config = parse_config(j.at("config").at("text").get<std::string>());
    r.complete = j.at("complete").get<bool>();
    r.error = j.value("error", std::string{});
    r.n_train = j.at("n_train").get<std::size_t>();
    r.n_test = j.at("n_test").get<std::size_t>();
    r.vocab_size = j.at("vocab_size").get<std::size_t>();
    if (!j.at("token_overlap").is_null()) r.token_overlap = j["token_overlap"].get<double>();
    for (const auto& rj : j.at("runs")) {
      SeedRun s;
      s.seed = rj.at("seed").get<std::uint64_t>();
      if (!rj.at("fraction").is_null()) s.fraction = rj["fraction"].get<double>();
      s.n_train = rj.at("n_train").get<std::size_t>();
      s.metrics = metrics_from_json(rj.at("metrics"));
      s.final_loss = rj.at("final_loss").get<double>();
      s.param_checksum = rj.at("param_checksum").get<std::uint64_t>();
      r.runs.push_back(s);
    }
    r.aggregate = aggregate_or_null(j.at("aggregate"));
    for (const auto& fj : j.at("fractions")) {
      FractionResult f;
      f.fraction = fj.at("fraction").get<double>();
      f.n_train = fj.at("n_train").get<std::size_t>();
      for (const auto& m : fj.at("runs")) f.runs.push_back(metrics_from_json(m));
      f.aggregate = aggregate_or_null(fj.at("aggregate"));
      r.fractions.push_back(std::move(f));
    }
    if (!j.at("references").is_null()) {
      const auto& rj = j["references"];
      ReferenceBaselines refs;
      refs.majority = metrics_from_json(rj.at("majority"));
      for (const auto& m : rj.at("random")) refs.random.push_back(metrics_from_json(m));
      refs.random_aggregate = aggregate_or_null(rj.at("random_aggregate"));
      r.references = std::move(refs);
    }
    r.created_at = j.value("created_at", std::string{});
    if (j.contains("artifacts")) r.artifacts = j["artifacts"].get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed results JSON: ") + e.what());
  }
  return r;
}

ResultsReport load_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    ResultsReport r = results_from_json(nlohmann::json::parse(in));
    r.run_dir = path.parent_path();
    return r;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string emit_table(std::span<const ResultsReport> reports, bool include_references) {
  if (reports.empty()) throw DataError("emit_table needs at least one report");
  std::vector<Row> rows = {{"model", "source", "train", "test", "exact match", "F1 macro"}};
  for (const auto& rep : reports) {
    const auto& c = rep.config;
    const std::string model = "encoder-L" + std::to_string(c.model.n_layers) + "-d" + std::to_string(c.model.d_model);
    const std::string source = c.train_langs.empty() ? c.test_lang : join(c.train_langs, "+");
    if (include_references && rep.references) {
      Row maj = {"Majority class", source, "-", c.test_lang};
      add_metric_cells(maj, std::nullopt, {rep.references->majority});
      rows.push_back(std::move(maj));
      Row rnd = {"Random", source, "-", c.test_lang};
      add_metric_cells(rnd, rep.references->random_aggregate, rep.references->random);
      rows.push_back(std::move(rnd));
    }
    std::vector<MetricsReport> runs;
    for (const auto& r : rep.runs) runs.push_back(r.metrics);
    switch (c.mode) {
      case ExperimentMode::baseline: {
        Row row = {model, source, c.test_lang, c.test_lang};
        add_metric_cells(row, rep.aggregate, runs);
        rows.push_back(std::move(row));
        break;
      }
      case ExperimentMode::zero_shot: {
        Row row = {model, source, join(c.train_langs, "+"), c.test_lang};
        add_metric_cells(row, rep.aggregate, runs);
        rows.push_back(std::move(row));
        break;
      }
      case ExperimentMode::mt_train: {
        Row row = {model, source, translation_label(c), c.test_lang};
        add_metric_cells(row, rep.aggregate, runs);
        rows.push_back(std::move(row));
        break;
      }
      case ExperimentMode::mixing_curve: {
        const std::string base = c.mix_with == MixWith::translated ? translation_label(c) : c.train_langs.front();
        for (const auto& f : rep.fractions) {
          Row row = {model, source, base + " + " + percent(f.fraction) + " " + c.test_lang, c.test_lang};
          add_metric_cells(row, f.aggregate, f.runs);
          rows.push_back(std::move(row));
        }
        break;
      }
    }
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      os << rows[r][i];
      if (i + 1 < rows[r].size()) os << std::string(width[i] - rows[r][i].size() + 2, ' ');
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

std::string mixing_csv(const ResultsReport& report) {
  std::ostringstream os;
  os << "fraction,mean,std\n";
  char buf[96];
  for (const auto& f : report.fractions) {
    if (f.aggregate) {
      std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f\n", f.fraction, f.aggregate->exact_match.mean,
                    f.aggregate->exact_match.std);
    } else {
      std::snprintf(buf, sizeof(buf), "%g,%.6f,\n", f.fraction, f.runs.empty() ? 0.0 : f.runs.front().exact_match);
    }
    os << buf;
  }
  return os.str();
}

}  // namespace xlt
