#include "xlt/harness.hpp"

#include "xlt/errors.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <future>

namespace xlt {

namespace {

std::size_t providers_needed(TranslationSetting t) {
  return t == TranslationSetting::x2 ? 2 : t == TranslationSetting::x1 ? 1 : 0;
}

bool uses_translation(const ExperimentConfig& cfg) {
  return cfg.translation != TranslationSetting::none &&
         (cfg.mode == ExperimentMode::mt_train ||
          (cfg.mode == ExperimentMode::mixing_curve && cfg.mix_with == MixWith::translated));
}

std::string fraction_tag(double f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", f);
  return buf;
}

std::string dir_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::filesystem::path fresh_run_dir(const ExperimentConfig& cfg) {
  const auto root = cfg.output_dir / cfg.name;
  const std::string stamp = dir_timestamp();
  auto dir = root / stamp;
  for (int i = 1; std::filesystem::exists(dir); ++i) dir = root / (stamp + "-" + std::to_string(i));
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

std::optional<AggregateReport> maybe_aggregate(const std::vector<MetricsReport>& runs,
                                               const std::vector<std::uint64_t>& seeds) {
  if (runs.size() < 2) return std::nullopt;
  return aggregate(runs, seeds);
}

struct Task {
  std::optional<std::size_t> fraction_index;
  std::uint64_t seed;
};

}  // namespace

Dataset namespaced(const Dataset& d, const std::string& lang) {
  std::vector<Example> out(d.examples());
  for (auto& ex : out) ex.id = lang + ":" + ex.id;
  return Dataset(std::move(out), d.split());
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg, TranslationCache& cache) {
  cfg.validate();
  PreparedExperiment prep;
  std::optional<SyntheticBenchmark> bench;
  if (cfg.synthetic) bench = generate_synthetic_benchmark(*cfg.synthetic);
  for (const auto& lang : cfg.languages()) {
    if (bench && (lang == bench->spec.lang_a || lang == bench->spec.lang_b) && !cfg.data.contains(lang)) {
      prep.train.emplace(lang, bench->train(lang));
      prep.test.emplace(lang, bench->test(lang));
    } else {
      const DataPaths& paths = cfg.data.at(lang);
      prep.train.emplace(lang, load_dataset(paths.train, Split::train));
      prep.test.emplace(lang, load_dataset(paths.test, Split::test));
    }
  }
  if (uses_translation(cfg)) {
    std::vector<std::unique_ptr<Provider>> owned;
    std::vector<Provider*> providers;
    for (std::size_t i = 0; i < providers_needed(cfg.translation); ++i) {
      const std::string& id = cfg.providers[i];
      if (const auto it = cfg.provider_configs.find(id); it != cfg.provider_configs.end()) {
        owned.push_back(make_provider(it->second));
      } else {
        owned.push_back(synthetic_provider(*bench, id));
      }
      providers.push_back(owned.back().get());
    }
    prep.translated = build_translated_dataset(prep.train.at(cfg.train_langs.front()), cfg.test_lang, providers,
                                               cache, cfg.offline);
  }
  std::vector<std::string> texts;
  for (const auto& lang : cfg.languages()) {
    for (const auto& ex : prep.train.at(lang)) texts.push_back(ex.text);
  }
  for (const auto& ex : prep.translated) texts.push_back(ex.text);
  prep.vocab = train_vocab_from_texts(texts, cfg.vocab_size);
  prep.model = cfg.model;
  prep.model.vocab_size = prep.vocab.size();
  prep.model.validate();
  return prep;
}

Dataset base_training_set(const ExperimentConfig& cfg, const PreparedExperiment& prep) {
  switch (cfg.mode) {
    case ExperimentMode::baseline: return prep.train.at(cfg.test_lang);
    case ExperimentMode::zero_shot: {
      if (cfg.train_langs.size() == 1) return prep.train.at(cfg.train_langs.front());
      std::vector<Dataset> parts;
      for (const auto& lang : cfg.train_langs) parts.push_back(namespaced(prep.train.at(lang), lang));
      return mix(parts);
    }
    case ExperimentMode::mt_train: return prep.translated;
    case ExperimentMode::mixing_curve:
      if (cfg.mix_with == MixWith::translated) return prep.translated;
      return namespaced(prep.train.at(cfg.train_langs.front()), cfg.train_langs.front());
  }
  return {};
}

TrainedRun train_and_evaluate(const ExperimentConfig& cfg, const PreparedExperiment& prep,
                              const Dataset& train_set, std::uint64_t seed) {
  if (train_set.empty()) throw DataError("training set is empty");
  Parameters params = init_parameters(prep.model, seed);
  if (cfg.pretrain.steps > 0) {
    PretrainConfig pc = cfg.pretrain;
    pc.seed = seed;
    const auto texts = train_set.texts();
    pretrain(params, prep.model, prep.vocab, texts, pc);
  }
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.freeze_prefixes = cfg.freeze_prefixes;
  CyclicalSchedule schedule = cfg.schedule;
  if (schedule.stepsize == 0) schedule.stepsize = default_stepsize(train_set.size(), tc.batch_size);
  TrainResult result = train(std::move(params), prep.model, train_set, tc, schedule, prep.vocab);

  const Dataset& test = prep.test.at(cfg.test_lang);
  const auto encodings = encode_dataset(prep.vocab, test, prep.model.max_len);
  const auto preds = predict_dataset(result.params, prep.model, encodings, tc.pool_mode, tc.threshold);
  const auto golds = test.labels();

  TrainedRun out;
  out.run.seed = seed;
  out.run.n_train = train_set.size();
  out.run.metrics = evaluate(preds, golds);
  out.run.final_loss = result.history.epochs.empty() ? 0.0 : result.history.epochs.back().mean_loss;
  out.run.param_checksum = result.params.checksum();
  out.history = std::move(result.history);
  out.params = std::move(result.params);
  return out;
}

ResultsReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultsReport report;
  report.config = cfg;
  report.created_at = utc_timestamp();
  if (cfg.persist) {
    report.run_dir = fresh_run_dir(cfg);
    report.artifacts["run_dir"] = report.run_dir.string();
  }

  auto persist = [&report, &cfg] {
    if (!cfg.persist) return;
    write_file(report.run_dir / "results.json", report.to_json(true).dump(2) + "\n");
    if (cfg.mode == ExperimentMode::mixing_curve && !report.fractions.empty()) {
      write_file(report.run_dir / "mixing.csv", mixing_csv(report));
    }
  };

  TranslationCache cache = cfg.cache.empty() ? TranslationCache() : TranslationCache(cfg.cache);
  const PreparedExperiment prep = prepare_experiment(cfg, cache);
  const Dataset base = base_training_set(cfg, prep);
  const Dataset& test = prep.test.at(cfg.test_lang);
  const Dataset& target_train = prep.train.at(cfg.test_lang);
  report.n_test = test.size();
  report.vocab_size = prep.vocab.size();
  report.n_train = base.size();
  if (cfg.mode == ExperimentMode::zero_shot) report.token_overlap = token_overlap(base, target_train, prep.vocab);
  if (cfg.persist) {
    prep.vocab.save(report.run_dir / "vocab.txt");
    report.artifacts["vocab"] = "vocab.txt";
  }

  // Reference baselines from the (base) training set.
  {
    ReferenceBaselines refs;
    const auto golds = test.labels();
    refs.majority = evaluate(majority_baseline(base).predict_n(test.size()), golds);
    for (std::uint64_t seed : cfg.seeds) {
      refs.random.push_back(evaluate(random_baseline(base, seed).predict_n(test.size()), golds));
    }
    refs.random_aggregate = maybe_aggregate(refs.random, cfg.seeds);
    report.references = std::move(refs);
  }

  std::vector<Task> tasks;
  if (cfg.mode == ExperimentMode::mixing_curve) {
    for (std::size_t f = 0; f < cfg.mix_fractions.size(); ++f) {
      for (std::uint64_t seed : cfg.seeds) tasks.push_back({f, seed});
    }
  } else {
    for (std::uint64_t seed : cfg.seeds) tasks.push_back({std::nullopt, seed});
  }

  auto run_task = [&](const Task& t) {
    if (!t.fraction_index) return train_and_evaluate(cfg, prep, base, t.seed);
    const double frac = cfg.mix_fractions[*t.fraction_index];
    const Dataset parts[] = {base, subsample(target_train, frac, t.seed)};
    TrainedRun r = train_and_evaluate(cfg, prep, mix(parts), t.seed);
    r.run.fraction = frac;
    return r;
  };

  std::vector<std::optional<TrainedRun>> done(tasks.size());
  std::exception_ptr failure;
  try {
    for (std::size_t start = 0; start < tasks.size(); start += cfg.jobs) {
      const std::size_t end = std::min(tasks.size(), start + cfg.jobs);
      std::vector<std::future<TrainedRun>> futures;
      for (std::size_t i = start; i < end; ++i) {
        futures.push_back(std::async(cfg.jobs > 1 ? std::launch::async : std::launch::deferred, run_task, tasks[i]));
      }
      std::exception_ptr first_error;
      for (std::size_t i = start; i < end; ++i) {
        try {
          done[i] = futures[i - start].get();
        } catch (...) {
          if (!first_error) first_error = std::current_exception();
        }
      }
      if (first_error) std::rethrow_exception(first_error);
    }
  } catch (const std::exception& e) {
    failure = std::current_exception();
    report.complete = false;
    report.error = e.what();
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!done[i]) continue;
    const TrainedRun& r = *done[i];
    report.runs.push_back(r.run);
    if (cfg.persist) {
      const std::string stem = r.run.fraction ? "f" + fraction_tag(*r.run.fraction) + "_seed" + std::to_string(r.run.seed)
                                               : "seed" + std::to_string(r.run.seed);
      write_file(report.run_dir / ("history_" + stem + ".csv"), r.history.to_csv());
      report.artifacts["history_" + stem] = "history_" + stem + ".csv";
      if (cfg.save_checkpoints) {
        save_checkpoint(r.params, prep.model, report.run_dir / ("checkpoint_" + stem + ".bin"));
        report.artifacts["checkpoint_" + stem] = "checkpoint_" + stem + ".bin";
      }
    }
  }

  if (cfg.mode == ExperimentMode::mixing_curve) {
    for (std::size_t f = 0; f < cfg.mix_fractions.size(); ++f) {
      FractionResult fr;
      fr.fraction = cfg.mix_fractions[f];
      std::vector<std::uint64_t> seeds;
      for (const auto& run : report.runs) {
        if (run.fraction && *run.fraction == fr.fraction) {
          fr.runs.push_back(run.metrics);
          fr.n_train = run.n_train;
          seeds.push_back(run.seed);
        }
      }
      if (fr.runs.empty()) continue;
      fr.aggregate = maybe_aggregate(fr.runs, seeds);
      report.fractions.push_back(std::move(fr));
    }
  } else {
    std::vector<MetricsReport> metrics;
    std::vector<std::uint64_t> seeds;
    for (const auto& run : report.runs) {
      metrics.push_back(run.metrics);
      seeds.push_back(run.seed);
    }
    report.aggregate = maybe_aggregate(metrics, seeds);
  }
  if (cfg.persist) {
    write_file(report.run_dir / "table.txt", emit_table(std::span<const ResultsReport>(&report, 1), true));
    report.artifacts["table"] = "table.txt";
    if (cfg.mode == ExperimentMode::mixing_curve) report.artifacts["mixing"] = "mixing.csv";
    report.artifacts["results"] = "results.json";
  }
  persist();
  if (failure) std::rethrow_exception(failure);
  return report;
}

}  // namespace xlt
