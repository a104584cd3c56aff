#include "xlt/corpus.hpp"
#include "xlt/errors.hpp"
#include "xlt/eval.hpp"
#include "xlt/harness.hpp"
#include "xlt/model.hpp"
#include "xlt/projection.hpp"
#include "xlt/synthetic.hpp"
#include "xlt/tokenizer.hpp"
#include "xlt/translate.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kTraining = 3 };

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& output_dir) {
  xlt::ExperimentConfig cfg = xlt::load_config(config_path);
  for (const auto& o : overrides) xlt::apply_override(cfg, o);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  const xlt::ResultsReport report = xlt::run_experiment(cfg);
  std::cout << xlt::emit_table(std::span<const xlt::ResultsReport>(&report, 1), true);
  if (cfg.persist) std::cout << "results: " << (report.run_dir / "results.json").string() << '\n';
  return kOk;
}

int cmd_table(const std::vector<std::string>& paths, bool references, const std::string& mixing_out) {
  std::vector<xlt::ResultsReport> reports;
  for (const auto& p : paths) {
    fs::path path = p;
    if (fs::is_directory(path)) path /= "results.json";
    reports.push_back(xlt::load_results(path));
  }
  std::cout << xlt::emit_table(reports, references);
  if (!mixing_out.empty()) {
    for (const auto& r : reports) {
      if (r.config.mode != xlt::ExperimentMode::mixing_curve) continue;
      std::ofstream out(mixing_out, std::ios::binary);
      if (!out) throw xlt::DataError("cannot write " + mixing_out);
      out << xlt::mixing_csv(r);
      break;
    }
  }
  return kOk;
}

int cmd_synth(const xlt::SyntheticSpec& spec, const std::string& out_dir) {
  const xlt::SyntheticBenchmark bench = xlt::generate_synthetic_benchmark(spec);
  xlt::save_synthetic_benchmark(bench, out_dir);
  std::cout << xlt::format_stats_row(spec.lang_a + ".train", xlt::compute_stats(bench.train_a)) << '\n'
            << xlt::format_stats_row(spec.lang_a + ".test", xlt::compute_stats(bench.test_a)) << '\n'
            << "checksum " << std::hex << bench.checksum() << std::dec << '\n';
  return kOk;
}

int cmd_stats(const std::vector<std::string>& paths) {
  for (const auto& p : paths) {
    std::cout << xlt::format_stats_row(fs::path(p).filename().string(),
                                       xlt::compute_stats(xlt::load_dataset(p, xlt::Split::unsplit)))
              << '\n';
  }
  return kOk;
}

std::vector<std::string> all_texts(const std::vector<std::string>& paths) {
  std::vector<std::string> texts;
  for (const auto& p : paths) {
    for (const auto& ex : xlt::load_dataset(p, xlt::Split::unsplit)) texts.push_back(ex.text);
  }
  return texts;
}

int cmd_vocab_train(const std::vector<std::string>& inputs, std::size_t size, const std::string& out) {
  const auto texts = all_texts(inputs);
  const xlt::Vocab vocab = xlt::train_vocab_from_texts(texts, size);
  vocab.save(out);
  std::cout << "vocab size " << vocab.size() << " written to " << out << '\n';
  return kOk;
}

int cmd_vocab_overlap(const std::string& vocab_path, const std::string& a, const std::string& b) {
  const xlt::Vocab vocab = xlt::Vocab::load(vocab_path);
  const double o = xlt::token_overlap(xlt::load_dataset(a, xlt::Split::unsplit),
                                      xlt::load_dataset(b, xlt::Split::unsplit), vocab);
  std::cout << "token_overlap " << o << '\n';
  return kOk;
}

struct ProjectArgs {
  std::vector<std::string> inputs;
  std::string vocab;
  std::string checkpoint;
  xlt::ModelConfig model;
  std::uint64_t seed = 0;
  std::size_t links = 20;
  xlt::TsneConfig tsne;
  std::string points_out = "points.csv";
  std::string links_out = "links.csv";
};

int cmd_project(ProjectArgs args) {
  const xlt::Vocab vocab = xlt::Vocab::load(args.vocab);
  xlt::Parameters params;
  xlt::ModelConfig cfg = args.model;
  if (!args.checkpoint.empty()) {
    auto loaded = xlt::load_checkpoint(args.checkpoint);
    params = std::move(loaded.first);
    cfg = loaded.second;
    if (cfg.vocab_size != vocab.size()) throw xlt::ConfigError("checkpoint vocab size does not match the vocab file");
  } else {
    cfg.vocab_size = vocab.size();
    params = xlt::init_parameters(cfg, args.seed);
  }
  std::vector<xlt::Dataset> by_lang;
  for (const auto& p : args.inputs) by_lang.push_back(xlt::load_dataset(p, xlt::Split::unsplit));
  args.tsne.seed = args.seed;
  const auto result = xlt::project_corpus(params, cfg, vocab, by_lang, args.links, args.tsne);
  xlt::write_projection(result, args.points_out, args.links_out);
  std::cout << result.ids.size() << " points, " << result.links.size() << " links, perplexity "
            << result.perplexity << ", final KL " << (result.kl_trace.empty() ? 0.0 : result.kl_trace.back().kl)
            << '\n';
  return kOk;
}

struct TranslateArgs {
  std::string input;
  std::string target;
  std::string providers;
  std::string cache;
  std::string out;
  std::string provider_config;
  std::string dict_dir;
  bool offline = false;
};

int cmd_translate(const TranslateArgs& args) {
  const xlt::Dataset source = xlt::load_dataset(args.input, xlt::Split::unsplit);
  std::map<std::string, xlt::ProviderConfig> configs;
  if (!args.provider_config.empty()) configs = xlt::load_config(args.provider_config).provider_configs;
  std::vector<std::unique_ptr<xlt::Provider>> owned;
  std::vector<xlt::Provider*> providers;
  for (const auto& id : split_commas(args.providers)) {
    if (const auto it = configs.find(id); it != configs.end()) {
      owned.push_back(xlt::make_provider(it->second));
    } else {
      const fs::path dict = fs::path(args.dict_dir.empty() ? "." : args.dict_dir) / ("provider_" + id + ".json");
      if (!fs::exists(dict)) {
        throw xlt::ConfigError("provider '" + id + "' has no configuration and no dictionary " + dict.string());
      }
      xlt::ProviderConfig pc;
      pc.id = id;
      pc.kind = xlt::ProviderKind::fake;
      pc.endpoint = dict.string();
      pc.rate_limit = 1e9;
      pc.texts_per_request = 64;
      owned.push_back(xlt::make_provider(pc));
    }
    providers.push_back(owned.back().get());
  }
  if (providers.empty()) throw xlt::ConfigError("--providers is empty");
  xlt::TranslationCache cache = args.cache.empty() ? xlt::TranslationCache() : xlt::TranslationCache(args.cache);
  const xlt::Dataset out = xlt::build_translated_dataset(source, args.target, providers, cache, args.offline);
  if (args.out.empty()) {
    std::cout << xlt::to_jsonl(out);
  } else {
    xlt::save_dataset(out, args.out);
    std::size_t requests = 0;
    for (const auto* p : providers) requests += p->request_count();
    std::cerr << out.size() << " examples written to " << args.out << " (" << requests << " provider requests)\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual symptom classification toolkit"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "Config file (key = value)")->required();
  run->add_option("--set", overrides, "Override a config key (key=value)");
  run->add_option("--output-dir", output_dir, "Root directory for run outputs");

  std::vector<std::string> table_paths;
  bool table_refs = false;
  std::string mixing_out;
  auto* table = app.add_subcommand("table", "Tabulate one or more results.json files");
  table->add_option("results", table_paths, "results.json files or run directories")->required();
  table->add_flag("--references", table_refs, "Include majority and random baseline rows");
  table->add_option("--mixing-csv", mixing_out, "Write the mixing curve CSV of the first mixing report");

  xlt::SyntheticSpec spec;
  std::string synth_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "Generate the synthetic parallel benchmark");
  synth->add_option("--overlap", spec.overlap, "Shared lexicon fraction in [0,1]");
  synth->add_option("--noise", spec.noise, "Fake-translation keyword corruption rate in [0,1]");
  synth->add_option("--size", spec.size, "Parallel examples per language");
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--lang-a", spec.lang_a, "Code of the first language");
  synth->add_option("--lang-b", spec.lang_b, "Code of the second language");
  synth->add_option("--out", synth_out, "Output directory");

  std::vector<std::string> stats_paths;
  auto* stats = app.add_subcommand("stats", "Print corpus statistics");
  stats->add_option("files", stats_paths, "JSONL datasets")->required();

  auto* vocab = app.add_subcommand("vocab", "Train a vocabulary or measure token overlap");
  vocab->require_subcommand(1);
  std::vector<std::string> vocab_inputs;
  std::size_t vocab_size = 1000;
  std::string vocab_out = "vocab.txt";
  auto* vtrain = vocab->add_subcommand("train", "Train a shared subword vocabulary");
  vtrain->add_option("--in", vocab_inputs, "JSONL datasets")->required();
  vtrain->add_option("--size", vocab_size, "Target vocabulary size");
  vtrain->add_option("--out", vocab_out, "Output vocabulary file");
  std::string ov_vocab, ov_a, ov_b;
  auto* voverlap = vocab->add_subcommand("overlap", "Jaccard overlap of token types of two datasets");
  voverlap->add_option("--vocab", ov_vocab, "Vocabulary file")->required();
  voverlap->add_option("a", ov_a, "First JSONL dataset")->required();
  voverlap->add_option("b", ov_b, "Second JSONL dataset")->required();

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "PCA + t-SNE projection of max-pooled encodings");
  project->add_option("--in", pa.inputs, "One JSONL dataset per language, parallel ids")->required();
  project->add_option("--vocab", pa.vocab, "Vocabulary file")->required();
  project->add_option("--checkpoint", pa.checkpoint, "Model checkpoint; random init when absent");
  project->add_option("--seed", pa.seed, "Init and t-SNE seed");
  project->add_option("--links", pa.links, "Number of linked parallel tuples");
  project->add_option("--perplexity", pa.tsne.perplexity, "t-SNE perplexity");
  project->add_option("--iterations", pa.tsne.iterations, "t-SNE iterations");
  project->add_option("--layers", pa.model.n_layers, "Encoder layers (no checkpoint)");
  project->add_option("--d-model", pa.model.d_model, "Hidden size (no checkpoint)");
  project->add_option("--heads", pa.model.n_heads, "Attention heads (no checkpoint)");
  project->add_option("--d-ff", pa.model.d_ff, "Feed-forward size (no checkpoint)");
  project->add_option("--max-len", pa.model.max_len, "Maximum sequence length (no checkpoint)");
  project->add_option("--points", pa.points_out, "Points CSV output");
  project->add_option("--links-out", pa.links_out, "Links CSV output");

  TranslateArgs ta;
  auto* translate = app.add_subcommand("translate", "Translate a dataset with one or more providers");
  translate->add_option("--in", ta.input, "Source JSONL dataset")->required();
  translate->add_option("--target", ta.target, "Target language code")->required();
  translate->add_option("--providers", ta.providers, "Comma separated provider ids")->required();
  translate->add_option("--cache", ta.cache, "Translation cache (JSONL)");
  translate->add_option("--out", ta.out, "Output JSONL (stdout when absent)");
  translate->add_option("--provider-config", ta.provider_config, "Config file with provider.<id>.* keys");
  translate->add_option("--dict-dir", ta.dict_dir, "Directory holding provider_<id>.json fake dictionaries");
  translate->add_flag("--offline", ta.offline, "Serve from the cache only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(config_path, overrides, output_dir);
    if (*table) return cmd_table(table_paths, table_refs, mixing_out);
    if (*synth) return cmd_synth(spec, synth_out);
    if (*stats) return cmd_stats(stats_paths);
    if (*vtrain) return cmd_vocab_train(vocab_inputs, vocab_size, vocab_out);
    if (*voverlap) return cmd_vocab_overlap(ov_vocab, ov_a, ov_b);
    if (*project) return cmd_project(pa);
    if (*translate) return cmd_translate(ta);
  } catch (const xlt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const xlt::TrainingError& e) {
    std::cerr << "training failure: " << e.what() << '\n';
    return kTraining;
  } catch (const xlt::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const xlt::ProviderError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
