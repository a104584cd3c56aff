#pragma once

#include "xlt/corpus.hpp"
#include "xlt/eval.hpp"
#include "xlt/model.hpp"
#include "xlt/optim.hpp"
#include "xlt/pretrain.hpp"
#include "xlt/synthetic.hpp"
#include "xlt/translate.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace xlt {

enum class ExperimentMode { baseline, zero_shot, mt_train, mixing_curve };
enum class TranslationSetting { none, x1, x2 };
/// What the original target-language fraction is mixed with.
enum class MixWith { translated, source };

std::string to_string(ExperimentMode mode);
std::string to_string(TranslationSetting setting);
std::string to_string(MixWith with);
ExperimentMode parse_mode(std::string_view s);
TranslationSetting parse_translation(std::string_view s);
MixWith parse_mix_with(std::string_view s);

struct DataPaths {
  std::filesystem::path train;
  std::filesystem::path test;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ExperimentMode mode = ExperimentMode::baseline;
  std::vector<std::string> train_langs;
  std::string test_lang;
  TranslationSetting translation = TranslationSetting::none;
  std::vector<std::string> providers;  // x1 uses the first, x2 the first two
  MixWith mix_with = MixWith::translated;
  std::vector<double> mix_fractions = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::string> freeze_prefixes;
  std::size_t vocab_size = 1000;

  ModelConfig model;
  TrainConfig train;  // seed and freeze_prefixes are overridden per run
  CyclicalSchedule schedule;
  PretrainConfig pretrain;

  std::map<std::string, DataPaths> data;  // by language
  std::optional<SyntheticSpec> synthetic;  // generated in memory instead of data files
  std::map<std::string, ProviderConfig> provider_configs;

  std::filesystem::path cache;  // empty: in-memory translation cache
  bool offline = false;
  std::filesystem::path output_dir = "runs";
  bool persist = true;
  bool save_checkpoints = false;
  std::size_t jobs = 1;  // seeds trained concurrently

  /// Throws ConfigError on invariant violations.
  void validate() const;
  /// Languages whose original data the run reads.
  std::vector<std::string> languages() const;
};

/// Flat `key = value` format: '#' starts a comment, lists are comma separated.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `key=value` assignment on top of an existing config.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);
void apply_override(ExperimentConfig& cfg, std::string_view assignment);
/// Serializes every field so that parse_config(config_text(c)) == c.
std::string config_text(const ExperimentConfig& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct SeedRun {
  std::uint64_t seed = 0;
  std::optional<double> fraction;  // mixing mode
  std::size_t n_train = 0;
  MetricsReport metrics;
  double final_loss = 0.0;
  std::uint64_t param_checksum = 0;
};

struct FractionResult {
  double fraction = 0.0;
  std::size_t n_train = 0;
  std::vector<MetricsReport> runs;  // seed order of the config
  std::optional<AggregateReport> aggregate;
};

struct ReferenceBaselines {
  MetricsReport majority;
  std::vector<MetricsReport> random;  // one per seed
  std::optional<AggregateReport> random_aggregate;
};

struct ResultsReport {
  ExperimentConfig config;
  std::vector<SeedRun> runs;
  std::optional<AggregateReport> aggregate;  // all modes but mixing
  std::vector<FractionResult> fractions;     // mixing mode
  std::optional<ReferenceBaselines> references;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t vocab_size = 0;
  std::optional<double> token_overlap;  // train vs test texts under the shared vocab
  bool complete = true;
  std::string error;

  std::string created_at;
  std::map<std::string, std::string> artifacts;
  std::filesystem::path run_dir;

  /// volatile = false drops created_at and artifacts.
  nlohmann::json to_json(bool include_volatile = true) const;
};

ResultsReport results_from_json(const nlohmann::json& j);
ResultsReport load_results(const std::filesystem::path& path);

/// Everything a run needs before the seed loop: original splits by
/// language, the translated training set (when the mode uses one), and the
/// shared vocabulary. The vocabulary is trained on the original training
/// splits of every language involved plus any translated texts, so it does
/// not depend on seeds or mix fractions.
struct PreparedExperiment {
  std::map<std::string, Dataset> train;
  std::map<std::string, Dataset> test;
  Dataset translated;
  Vocab vocab;
  ModelConfig model;  // vocab_size filled in
};

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg, TranslationCache& cache);

/// Training set of a non-mixing mode, or the base set that mixing adds the
/// target fraction to.
Dataset base_training_set(const ExperimentConfig& cfg, const PreparedExperiment& prep);

/// Ids of the set are prefixed with "{lang}:".
Dataset namespaced(const Dataset& d, const std::string& lang);

struct TrainedRun {
  SeedRun run;
  TrainHistory history;
  Parameters params;
};

/// Init from seed, optional pretraining, fine-tuning and evaluation on the
/// test_lang test split.
TrainedRun train_and_evaluate(const ExperimentConfig& cfg, const PreparedExperiment& prep,
                              const Dataset& train_set, std::uint64_t seed);

/// Runs every seed (and fraction) of the experiment. Persists results under
/// output_dir/name/timestamp/ when cfg.persist. A training failure writes
/// the partial report with complete=false and rethrows.
ResultsReport run_experiment(const ExperimentConfig& cfg);

/// model, source, train, test, exact match mean (std), F1 macro mean (std).
/// Mixing reports give one row per fraction.
std::string emit_table(std::span<const ResultsReport> reports, bool include_references = false);
/// fraction,mean,std of exact match; one line per fraction.
std::string mixing_csv(const ResultsReport& report);

}  // namespace xlt
