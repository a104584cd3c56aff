#include "test_util.hpp"
#include "xlt/errors.hpp"
#include "xlt/harness.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace xlt;

namespace {

const char* kBase = R"(# small synthetic run
name = small
mode = baseline
test_lang = sb
synthetic.overlap = 0.0
synthetic.noise = 0.3
synthetic.size = 200
synthetic.seed = 3
seeds = 0, 1
vocab_size = 300
model.n_layers = 1
model.d_model = 16
model.n_heads = 2
model.d_ff = 32
model.max_len = 12
train.epochs = 2
train.batch_size = 16
schedule.lr_min = 1e-3
schedule.lr_max = 5e-3
persist = false
)";

ExperimentConfig small(const std::string& extra = "") {
  ExperimentConfig c = parse_config(std::string(kBase) + extra);
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::set<std::string> word_types(const Dataset& a, const Dataset& b) {
  std::set<std::string> out;
  for (const Dataset* d : {&a, &b}) {
    for (const auto& e : d->examples()) {
      std::istringstream is(e.text);
      for (std::string w; is >> w;) out.insert(w);
    }
  }
  return out;
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndLists) {
  const ExperimentConfig c = small("mix_fractions = 0.5, 1\ntrain.pool = max\nprovider.g.kind = fake\n"
                                   "provider.g.endpoint = /tmp/p.json   # trailing comment\n");
  EXPECT_EQ(c.name, "small");
  EXPECT_EQ(c.mode, ExperimentMode::baseline);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(c.mix_fractions, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(c.model.d_model, 16U);
  EXPECT_EQ(c.train.pool_mode, PoolMode::max);
  EXPECT_EQ(c.schedule.lr_max, 5e-3);
  ASSERT_TRUE(c.synthetic.has_value());
  EXPECT_EQ(c.synthetic->size, 200U);
  EXPECT_EQ(c.provider_configs.at("g").endpoint, "/tmp/p.json");
  EXPECT_FALSE(c.persist);
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_config("name = x\n\nbogus.key = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("seeds = 1, x\n"), ConfigError);
  EXPECT_THROW(parse_config("no equals sign\n"), ConfigError);
  EXPECT_THROW(parse_config("mode = sideways\n"), ConfigError);
}

TEST(Config, TextRoundTripProperty) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    ExperimentConfig c = small();
    c.name = "n" + std::to_string(rng.uniform_int(1000));
    c.mode = ExperimentMode::mixing_curve;
    c.train_langs = {"sa"};
    c.translation = rng.uniform() < 0.5 ? TranslationSetting::x1 : TranslationSetting::x2;
    c.providers = {"g", "a"};
    c.mix_fractions = {rng.uniform(), 1.0 / 3.0};
    c.seeds = {rng.uniform_int(1ULL << 62), 7};
    c.schedule.lr_min = rng.uniform() * 1e-4;
    c.train.weight_decay = rng.uniform();
    c.model.dropout_rate = rng.uniform() * 0.5;
    c.freeze_prefixes = {"embeddings.", "layer.0."};
    c.synthetic->noise = rng.uniform();
    ProviderConfig pc;
    pc.id = "g";
    pc.kind = ProviderKind::google;
    pc.rate_limit = rng.uniform() * 10 + 0.1;
    c.provider_configs["g"] = pc;
    const std::string text = config_text(c);
    const ExperimentConfig back = parse_config(text);
    EXPECT_EQ(config_text(back), text);
    EXPECT_EQ(back.mix_fractions, c.mix_fractions);
    EXPECT_EQ(back.seeds, c.seeds);
    EXPECT_EQ(back.model, c.model);
    EXPECT_EQ(back.provider_configs.at("g").rate_limit, pc.rate_limit);
  }
}

TEST(Config, OverridesApplyOnTop) {
  ExperimentConfig c = small();
  apply_override(c, "train.epochs=7");
  apply_override(c, "seeds = 4,5,6");
  EXPECT_EQ(c.train.epochs, 7U);
  EXPECT_EQ(c.seeds.size(), 3U);
  EXPECT_THROW(apply_override(c, "nothing"), ConfigError);
  EXPECT_THROW(apply_override(c, "model.bogus=1"), ConfigError);
}

TEST(Config, ModeInvariants) {
  auto expect_invalid = [](const std::string& extra) {
    EXPECT_THROW(small(extra).validate(), ConfigError) << extra;
  };
  EXPECT_NO_THROW(small().validate());
  expect_invalid("mode = zero_shot\ntrain_langs = sb\n");
  expect_invalid("mode = zero_shot\n");
  expect_invalid("mode = mt_train\ntrain_langs = sa\n");
  expect_invalid("mode = mt_train\ntrain_langs = sa\ntranslation = x2\nproviders = g\n");
  expect_invalid("mode = mixing_curve\ntrain_langs = sa\ntranslation = x1\nproviders = g\nmix_fractions = 1.5\n");
  expect_invalid("mode = mixing_curve\ntrain_langs = sa\ntranslation = x1\nproviders = g\nmix_fractions =\n");
  expect_invalid("mode = baseline\ntrain_langs = sa\n");
  expect_invalid("seeds = 1, 1\n");
  expect_invalid("mode = mt_train\ntrain_langs = sa\ntranslation = x1\nproviders = nope\n");
  expect_invalid("test_lang = en\n");
  EXPECT_NO_THROW(small("mode = zero_shot\ntrain_langs = sa\n").validate());
  EXPECT_NO_THROW(small("mode = mixing_curve\ntrain_langs = sa\nmix_with = source\nmix_fractions = 0,1\n").validate());
}

TEST(Synthetic, FullOverlapSharesEveryType) {
  const SyntheticBenchmark b = generate_synthetic_benchmark({1.0, 0.0, 200, 1});
  EXPECT_EQ(word_types(b.train_a, b.test_a), word_types(b.train_b, b.test_b));
  const std::vector<Dataset> all{b.train_a, b.train_b};
  const Vocab v = train_vocab(all, 300);
  EXPECT_DOUBLE_EQ(token_overlap(b.train_a, b.train_b, v), 1.0);
  EXPECT_EQ(b.train_a.size(), 150U);
  EXPECT_EQ(b.test_b.size(), 50U);
  for (std::size_t i = 0; i < b.train_a.size(); ++i) {
    EXPECT_EQ(b.train_a[i].id, b.train_b[i].id);
    EXPECT_EQ(b.train_a[i].labels, b.train_b[i].labels);
  }
}

TEST(Synthetic, ZeroOverlapSharesNothing) {
  const SyntheticBenchmark b = generate_synthetic_benchmark({0.0, 0.3, 200, 1});
  const auto ta = word_types(b.train_a, b.test_a);
  const auto tb = word_types(b.train_b, b.test_b);
  for (const auto& w : ta) EXPECT_FALSE(tb.contains(w)) << w;
  const std::vector<Dataset> all{b.train_a, b.train_b};
  const Vocab v = train_vocab(all, 300);
  EXPECT_DOUBLE_EQ(token_overlap(b.train_a, b.train_b, v), 0.0);
}

TEST(Synthetic, PartialOverlapIsMonotoneProperty) {
  double last = -1.0;
  for (double o : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const SyntheticBenchmark b = generate_synthetic_benchmark({o, 0.0, 400, 2});
    const auto ta = word_types(b.train_a, b.test_a);
    const auto tb = word_types(b.train_b, b.test_b);
    std::size_t shared = 0;
    for (const auto& w : ta) shared += tb.contains(w) ? 1 : 0;
    const double frac = static_cast<double>(shared) / static_cast<double>(ta.size());
    EXPECT_GE(frac, last);
    last = frac;
  }
}

TEST(Synthetic, ChecksumStableAndSeedSensitive) {
  const SyntheticSpec spec{0.0, 0.3, 1000, 42};
  const auto a = generate_synthetic_benchmark(spec);
  EXPECT_EQ(a.checksum(), generate_synthetic_benchmark(spec).checksum());
  SyntheticSpec other = spec;
  other.seed = 43;
  EXPECT_NE(a.checksum(), generate_synthetic_benchmark(other).checksum());
  // the source side does not depend on the overlap level
  other = spec;
  other.overlap = 0.5;
  EXPECT_EQ(to_jsonl(generate_synthetic_benchmark(other).train_a), to_jsonl(a.train_a));
  EXPECT_THROW(generate_synthetic_benchmark({1.5, 0.0, 100, 0}), ConfigError);
  EXPECT_THROW(generate_synthetic_benchmark({0.5, -0.1, 100, 0}), ConfigError);
}

TEST(Synthetic, TranslatorsDropDifferentForms) {
  const SyntheticBenchmark b = generate_synthetic_benchmark({0.0, 0.0, 400, 3});
  auto g = synthetic_provider(b, "g");
  auto a = synthetic_provider(b, "a");
  TranslationCache cache;
  std::vector<Provider*> pg{g.get()}, pa{a.get()};
  const Dataset tg = build_translated_dataset(b.train_a, "sb", pg, cache, false);
  const Dataset ta = build_translated_dataset(b.train_a, "sb", pa, cache, false);
  const auto target = word_types(b.train_b, b.test_b);
  const auto via_g = word_types(tg, Dataset{});
  const auto via_a = word_types(ta, Dataset{});
  for (const auto& w : via_g) EXPECT_TRUE(target.contains(w)) << w;
  EXPECT_NE(via_g, via_a);
  std::set<std::string> both = via_g;
  both.insert(via_a.begin(), via_a.end());
  EXPECT_GT(both.size(), via_g.size());
  EXPECT_THROW(synthetic_provider(b, "z"), ConfigError);
}

TEST(Run, BaselineReportsEverySeedOnce) {
  xlt::testing::TempDir dir;
  ExperimentConfig c = small("persist = true\nseeds = 2, 0, 1\n");
  c.output_dir = dir.path();
  const ResultsReport r = run_experiment(c);
  ASSERT_EQ(r.runs.size(), 3U);
  std::multiset<std::uint64_t> seen;
  for (const auto& run : r.runs) seen.insert(run.seed);
  EXPECT_EQ(seen, (std::multiset<std::uint64_t>{0, 1, 2}));
  ASSERT_TRUE(r.aggregate.has_value());
  EXPECT_EQ(r.aggregate->runs, 3U);
  EXPECT_TRUE(r.complete);
  EXPECT_EQ(r.n_train, 150U);
  EXPECT_EQ(r.n_test, 50U);
  ASSERT_TRUE(r.references.has_value());
  EXPECT_EQ(r.references->random.size(), 3U);

  EXPECT_TRUE(r.run_dir.string().starts_with((dir.path() / "small").string()));
  for (const char* f : {"results.json", "vocab.txt", "history_seed0.csv", "history_seed2.csv", "table.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(r.run_dir / f)) << f;
  }
  const ResultsReport back = load_results(r.run_dir / "results.json");
  EXPECT_EQ(back.to_json(false).dump(), r.to_json(false).dump());
  EXPECT_EQ(config_text(back.config), config_text(c));
}

TEST(Run, DeterministicAcrossRunsAndJobs) {
  ExperimentConfig c = small("mode = zero_shot\ntrain_langs = sa\n");
  const auto a = run_experiment(c).to_json(false).dump();
  const auto b = run_experiment(c).to_json(false).dump();
  EXPECT_EQ(a, b);
  c.jobs = 2;
  const auto parallel = run_experiment(c).to_json(false);
  EXPECT_EQ(parallel.at("runs").dump(), nlohmann::json::parse(a).at("runs").dump());
}

TEST(Run, ZeroShotRecordsTokenOverlap) {
  const ResultsReport r = run_experiment(small("mode = zero_shot\ntrain_langs = sa\n"));
  ASSERT_TRUE(r.token_overlap.has_value());
  EXPECT_DOUBLE_EQ(*r.token_overlap, 0.0);
}

TEST(Run, MixingEndpointsMatchSeparateRuns) {
  const std::string mt = "mode = mt_train\ntrain_langs = sa\ntranslation = x1\nproviders = g\n";
  const ResultsReport mt_report = run_experiment(small(mt));
  const ExperimentConfig mix_cfg = small("mode = mixing_curve\ntrain_langs = sa\ntranslation = x1\n"
                                         "providers = g\nmix_fractions = 0, 1\n");
  const ResultsReport mix_report = run_experiment(mix_cfg);
  ASSERT_EQ(mix_report.fractions.size(), 2U);
  EXPECT_FALSE(mix_report.aggregate.has_value());
  const auto& f0 = mix_report.fractions[0];
  EXPECT_EQ(f0.n_train, mt_report.n_train);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(f0.runs[i].exact_match, mt_report.runs[i].metrics.exact_match);
    EXPECT_EQ(f0.runs[i].macro_f1, mt_report.runs[i].metrics.macro_f1);
  }
  std::map<std::pair<double, std::uint64_t>, std::uint64_t> checksum;
  for (const auto& r : mix_report.runs) checksum[{*r.fraction, r.seed}] = r.param_checksum;
  for (const auto& r : mt_report.runs) EXPECT_EQ(checksum.at({0.0, r.seed}), r.param_checksum);

  // fraction 1: translated data plus the whole original training split
  TranslationCache cache;
  const PreparedExperiment prep = prepare_experiment(mix_cfg, cache);
  const Dataset parts[] = {base_training_set(mix_cfg, prep), prep.train.at("sb")};
  const Dataset full = mix(parts);
  EXPECT_EQ(mix_report.fractions[1].n_train, full.size());
  const TrainedRun direct = train_and_evaluate(mix_cfg, prep, full, 1);
  EXPECT_EQ(checksum.at({1.0, 1}), direct.run.param_checksum);
  EXPECT_EQ(mix_report.fractions[1].runs[1].exact_match, direct.run.metrics.exact_match);
}

TEST(Run, TwoProvidersDoubleTheTrainingSet) {
  const ResultsReport x1 = run_experiment(small("mode = mt_train\ntrain_langs = sa\ntranslation = x1\nproviders = a\n"));
  const ResultsReport x2 = run_experiment(small("mode = mt_train\ntrain_langs = sa\ntranslation = x2\nproviders = g, a\n"));
  EXPECT_EQ(x1.n_train, 150U);
  EXPECT_EQ(x2.n_train, 300U);
}

TEST(Run, TrainingFailureLeavesIncompleteReport) {
  xlt::testing::TempDir dir;
  ExperimentConfig c = small("persist = true\nschedule.lr_min = 1e250\nschedule.lr_max = 1e250\n");
  c.output_dir = dir.path();
  EXPECT_THROW(run_experiment(c), TrainingError);
  std::filesystem::path results;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (e.path().filename() == "results.json") results = e.path();
  }
  ASSERT_FALSE(results.empty());
  const ResultsReport partial = load_results(results);
  EXPECT_FALSE(partial.complete);
  EXPECT_FALSE(partial.error.empty());
}

TEST(Run, MissingDataFileIsDataError) {
  ExperimentConfig c = parse_config("test_lang = en\ndata.en.train = /nonexistent/a.jsonl\n"
                                    "data.en.test = /nonexistent/b.jsonl\npersist = false\nvocab_size = 100\n");
  EXPECT_THROW(run_experiment(c), DataError);
}

TEST(Table, RowsAndFormatting) {
  ResultsReport r;
  r.config = small();
  MetricsReport m1, m2;
  m1.exact_match = 0.9;
  m2.exact_match = 0.8;
  m1.macro_f1 = m2.macro_f1 = 0.5;
  r.runs = {{0, std::nullopt, 10, m1, 0, 0}, {1, std::nullopt, 10, m2, 0, 0}};
  const std::vector<MetricsReport> ms{m1, m2};
  const std::vector<std::uint64_t> seeds{0, 1};
  r.aggregate = aggregate(ms, seeds);
  const std::vector<ResultsReport> one{r};
  const std::string table = emit_table(one);
  std::istringstream is(table);
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3U);
  EXPECT_TRUE(lines[0].starts_with("model"));
  EXPECT_EQ(lines[1].find_first_not_of('-'), std::string::npos);
  EXPECT_NE(lines[2].find("0.850 (0.071)"), std::string::npos) << lines[2];
  EXPECT_NE(lines[2].find("0.500 (0.000)"), std::string::npos);
  EXPECT_NE(lines[2].find("encoder-L1-d16"), std::string::npos);

  const std::vector<ResultsReport> none;
  EXPECT_THROW(emit_table(none), DataError);
}

TEST(Table, MixingRowsAndCsv) {
  const ResultsReport r = run_experiment(small("mode = mixing_curve\ntrain_langs = sa\ntranslation = x1\n"
                                               "providers = g\nmix_fractions = 0.1, 0.5\n"));
  const std::vector<ResultsReport> one{r};
  const std::string table = emit_table(one);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_NE(table.find("T(sa->sb) x1[g] + 10% sb"), std::string::npos) << table;
  EXPECT_NE(table.find("+ 50% sb"), std::string::npos);
  const std::string csv = mixing_csv(r);
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "fraction,mean,std");
  EXPECT_TRUE(row.starts_with("0.1,"));
  const std::string with_refs = emit_table(one, true);
  EXPECT_NE(with_refs.find("Majority class"), std::string::npos);
  EXPECT_NE(with_refs.find("Random"), std::string::npos);
}
