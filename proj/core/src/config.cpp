#include "xlt/errors.hpp"
#include "xlt/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace xlt {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (item.empty()) throw ConfigError("empty item in list '" + std::string(s) + "'");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  }
  return d;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::string fmt(double d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += fmt(item);
    } else if constexpr (std::is_arithmetic_v<T>) {
      out += std::to_string(item);
    } else {
      out += item;
    }
  }
  return out;
}

SyntheticSpec& synth(ExperimentConfig& cfg) {
  if (!cfg.synthetic) cfg.synthetic = SyntheticSpec{};
  return *cfg.synthetic;
}

bool is_synthetic_provider(const ExperimentConfig& cfg, const std::string& id) {
  return cfg.synthetic.has_value() && !cfg.provider_configs.contains(id) && (id == "g" || id == "a");
}

}  // namespace

std::string to_string(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::baseline: return "baseline";
    case ExperimentMode::zero_shot: return "zero_shot";
    case ExperimentMode::mt_train: return "mt_train";
    case ExperimentMode::mixing_curve: return "mixing_curve";
  }
  return "baseline";
}

std::string to_string(TranslationSetting s) {
  switch (s) {
    case TranslationSetting::none: return "none";
    case TranslationSetting::x1: return "x1";
    case TranslationSetting::x2: return "x2";
  }
  return "none";
}

std::string to_string(MixWith w) { return w == MixWith::translated ? "translated" : "source"; }

ExperimentMode parse_mode(std::string_view s) {
  if (s == "baseline") return ExperimentMode::baseline;
  if (s == "zero_shot") return ExperimentMode::zero_shot;
  if (s == "mt_train") return ExperimentMode::mt_train;
  if (s == "mixing_curve") return ExperimentMode::mixing_curve;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

TranslationSetting parse_translation(std::string_view s) {
  if (s == "none") return TranslationSetting::none;
  if (s == "x1") return TranslationSetting::x1;
  if (s == "x2") return TranslationSetting::x2;
  throw ConfigError("unknown translation setting '" + std::string(s) + "'");
}

MixWith parse_mix_with(std::string_view s) {
  if (s == "translated") return MixWith::translated;
  if (s == "source") return MixWith::source;
  throw ConfigError("unknown mix_with value '" + std::string(s) + "'");
}

std::vector<std::string> ExperimentConfig::languages() const {
  std::vector<std::string> out = train_langs;
  if (std::find(out.begin(), out.end(), test_lang) == out.end()) out.push_back(test_lang);
  return out;
}

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("name must be non-empty without '/'");
  if (test_lang.empty()) throw ConfigError("test_lang is required");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (std::set<std::string>(train_langs.begin(), train_langs.end()).size() != train_langs.size()) {
    throw ConfigError("train_langs must be distinct");
  }
  const bool foreign = !train_langs.empty() &&
                       std::find(train_langs.begin(), train_langs.end(), test_lang) == train_langs.end();
  const std::size_t needed = translation == TranslationSetting::x2 ? 2 : translation == TranslationSetting::x1 ? 1 : 0;
  switch (mode) {
    case ExperimentMode::baseline:
      if (!(train_langs.empty() || (train_langs.size() == 1 && train_langs[0] == test_lang))) {
        throw ConfigError("baseline mode trains and tests on test_lang");
      }
      break;
    case ExperimentMode::zero_shot:
      if (!foreign) throw ConfigError("zero_shot requires train languages that differ from test_lang");
      break;
    case ExperimentMode::mt_train:
      if (train_langs.size() != 1 || !foreign) throw ConfigError("mt_train needs one source language other than test_lang");
      if (translation == TranslationSetting::none) throw ConfigError("mt_train needs translation = x1 or x2");
      break;
    case ExperimentMode::mixing_curve:
      if (mix_fractions.empty()) throw ConfigError("mixing_curve requires non-empty mix_fractions");
      for (double f : mix_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("mix fraction " + fmt(f) + " outside [0, 1]");
      }
      if (train_langs.size() != 1 || !foreign) throw ConfigError("mixing_curve needs one source language other than test_lang");
      if (mix_with == MixWith::translated && translation == TranslationSetting::none) {
        throw ConfigError("mixing with translated data needs translation = x1 or x2");
      }
      break;
  }
  if (providers.size() < needed) {
    throw ConfigError("translation " + to_string(translation) + " needs " + std::to_string(needed) + " providers");
  }
  if (std::set<std::string>(providers.begin(), providers.end()).size() != providers.size()) {
    throw ConfigError("providers must be distinct");
  }
  for (std::size_t i = 0; i < needed; ++i) {
    if (!provider_configs.contains(providers[i]) && !is_synthetic_provider(*this, providers[i])) {
      throw ConfigError("provider '" + providers[i] + "' has no provider." + providers[i] + ".* settings");
    }
  }
  for (const auto& [id, pc] : provider_configs) {
    if (pc.id != id) throw ConfigError("provider config id mismatch for '" + id + "'");
    pc.validate();
  }
  ModelConfig m = model;
  m.vocab_size = std::max<std::size_t>(vocab_size, 6);
  m.validate();
  if (vocab_size <= static_cast<std::size_t>(Vocab::kNumSpecial)) throw ConfigError("vocab_size too small");
  if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.threshold > 0.0 && train.threshold < 1.0)) throw ConfigError("train.threshold must lie in (0, 1)");
  if (!(schedule.lr_min > 0.0 && schedule.lr_max >= schedule.lr_min)) {
    throw ConfigError("schedule needs 0 < lr_min <= lr_max");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (synthetic) {
    synthetic->validate();
    for (const auto& lang : languages()) {
      if (lang != synthetic->lang_a && lang != synthetic->lang_b && !data.contains(lang)) {
        throw ConfigError("language '" + lang + "' is neither synthetic nor given data paths");
      }
    }
  } else {
    for (const auto& lang : languages()) {
      const auto it = data.find(lang);
      if (it == data.end() || it->second.train.empty() || it->second.test.empty()) {
        throw ConfigError("missing data." + lang + ".train / data." + lang + ".test");
      }
    }
  }
}

void apply_setting(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in) {
  const std::string key(trim(key_in));
  const std::string_view v = trim(value_in);
  if (key == "name") cfg.name = v;
  else if (key == "mode") cfg.mode = parse_mode(v);
  else if (key == "train_langs" || key == "train_lang") cfg.train_langs = split_list(v);
  else if (key == "test_lang") cfg.test_lang = v;
  else if (key == "translation") cfg.translation = parse_translation(v);
  else if (key == "providers") cfg.providers = split_list(v);
  else if (key == "mix_with") cfg.mix_with = parse_mix_with(v);
  else if (key == "mix_fractions") {
    cfg.mix_fractions.clear();
    for (const auto& s : split_list(v)) cfg.mix_fractions.push_back(to_double(key, s));
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& s : split_list(v)) cfg.seeds.push_back(to_uint(key, s));
  } else if (key == "freeze_prefixes") cfg.freeze_prefixes = split_list(v);
  else if (key == "vocab_size") cfg.vocab_size = to_uint(key, v);
  else if (key == "cache") cfg.cache = std::string(v);
  else if (key == "offline") cfg.offline = to_bool(key, v);
  else if (key == "output_dir") cfg.output_dir = std::string(v);
  else if (key == "persist") cfg.persist = to_bool(key, v);
  else if (key == "save_checkpoints") cfg.save_checkpoints = to_bool(key, v);
  else if (key == "jobs") cfg.jobs = to_uint(key, v);
  else if (key == "model.n_layers") cfg.model.n_layers = to_uint(key, v);
  else if (key == "model.d_model") cfg.model.d_model = to_uint(key, v);
  else if (key == "model.n_heads") cfg.model.n_heads = to_uint(key, v);
  else if (key == "model.d_ff") cfg.model.d_ff = to_uint(key, v);
  else if (key == "model.max_len") cfg.model.max_len = to_uint(key, v);
  else if (key == "model.dropout") cfg.model.dropout_rate = to_double(key, v);
  else if (key == "train.epochs") cfg.train.epochs = to_uint(key, v);
  else if (key == "train.batch_size") cfg.train.batch_size = to_uint(key, v);
  else if (key == "train.threshold") cfg.train.threshold = to_double(key, v);
  else if (key == "train.pool") cfg.train.pool_mode = parse_pool_mode(v);
  else if (key == "train.weight_decay") cfg.train.weight_decay = to_double(key, v);
  else if (key == "train.clip_norm") cfg.train.clip_norm = to_double(key, v);
  else if (key == "schedule.lr_min") cfg.schedule.lr_min = to_double(key, v);
  else if (key == "schedule.lr_max") cfg.schedule.lr_max = to_double(key, v);
  else if (key == "schedule.stepsize") cfg.schedule.stepsize = to_uint(key, v);
  else if (key == "pretrain.steps") cfg.pretrain.steps = to_uint(key, v);
  else if (key == "pretrain.batch_size") cfg.pretrain.batch_size = to_uint(key, v);
  else if (key == "pretrain.mask_rate") cfg.pretrain.mask_rate = to_double(key, v);
  else if (key == "pretrain.lr") cfg.pretrain.lr = to_double(key, v);
  else if (key == "synthetic.overlap") synth(cfg).overlap = to_double(key, v);
  else if (key == "synthetic.noise") synth(cfg).noise = to_double(key, v);
  else if (key == "synthetic.size") synth(cfg).size = to_uint(key, v);
  else if (key == "synthetic.seed") synth(cfg).seed = to_uint(key, v);
  else if (key == "synthetic.lang_a") synth(cfg).lang_a = v;
  else if (key == "synthetic.lang_b") synth(cfg).lang_b = v;
  else if (key.starts_with("data.")) {
    const auto dot = key.rfind('.');
    const std::string lang = key.substr(5, dot - 5);
    const std::string field = key.substr(dot + 1);
    if (lang.empty() || dot <= 5) throw ConfigError("malformed data key '" + key + "'");
    if (field == "train") cfg.data[lang].train = std::string(v);
    else if (field == "test") cfg.data[lang].test = std::string(v);
    else throw ConfigError("unknown data field '" + key + "'");
  } else if (key.starts_with("provider.")) {
    const auto dot = key.rfind('.');
    const std::string id = key.substr(9, dot - 9);
    const std::string field = key.substr(dot + 1);
    if (id.empty() || dot <= 9) throw ConfigError("malformed provider key '" + key + "'");
    ProviderConfig& pc = cfg.provider_configs[id];
    pc.id = id;
    if (field == "kind") pc.kind = parse_provider_kind(v);
    else if (field == "endpoint") pc.endpoint = v;
    else if (field == "credential_env") pc.credential_env = v;
    else if (field == "region") pc.region = v;
    else if (field == "rate_limit") pc.rate_limit = to_double(key, v);
    else if (field == "texts_per_request") pc.texts_per_request = to_uint(key, v);
    else if (field == "max_attempts") pc.retry.max_attempts = static_cast<int>(to_uint(key, v));
    else if (field == "backoff_base_s") pc.retry.backoff_base_s = to_double(key, v);
    else throw ConfigError("unknown provider field '" + key + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' lacks '='");
  apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!trim(line).empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      try {
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&os](std::string_view k, const std::string& v) { os << k << " = " << v << '\n'; };
  kv("name", c.name);
  kv("mode", to_string(c.mode));
  kv("train_langs", join(c.train_langs));
  kv("test_lang", c.test_lang);
  kv("translation", to_string(c.translation));
  kv("providers", join(c.providers));
  kv("mix_with", to_string(c.mix_with));
  kv("mix_fractions", join(c.mix_fractions));
  kv("seeds", join(c.seeds));
  kv("freeze_prefixes", join(c.freeze_prefixes));
  kv("vocab_size", std::to_string(c.vocab_size));
  kv("cache", c.cache.string());
  kv("offline", c.offline ? "true" : "false");
  kv("output_dir", c.output_dir.string());
  kv("persist", c.persist ? "true" : "false");
  kv("save_checkpoints", c.save_checkpoints ? "true" : "false");
  kv("jobs", std::to_string(c.jobs));
  kv("model.n_layers", std::to_string(c.model.n_layers));
  kv("model.d_model", std::to_string(c.model.d_model));
  kv("model.n_heads", std::to_string(c.model.n_heads));
  kv("model.d_ff", std::to_string(c.model.d_ff));
  kv("model.max_len", std::to_string(c.model.max_len));
  kv("model.dropout", fmt(c.model.dropout_rate));
  kv("train.epochs", std::to_string(c.train.epochs));
  kv("train.batch_size", std::to_string(c.train.batch_size));
  kv("train.threshold", fmt(c.train.threshold));
  kv("train.pool", std::string(to_string(c.train.pool_mode)));
  kv("train.weight_decay", fmt(c.train.weight_decay));
  kv("train.clip_norm", fmt(c.train.clip_norm));
  kv("schedule.lr_min", fmt(c.schedule.lr_min));
  kv("schedule.lr_max", fmt(c.schedule.lr_max));
  kv("schedule.stepsize", std::to_string(c.schedule.stepsize));
  kv("pretrain.steps", std::to_string(c.pretrain.steps));
  kv("pretrain.batch_size", std::to_string(c.pretrain.batch_size));
  kv("pretrain.mask_rate", fmt(c.pretrain.mask_rate));
  kv("pretrain.lr", fmt(c.pretrain.lr));
  if (c.synthetic) {
    kv("synthetic.overlap", fmt(c.synthetic->overlap));
    kv("synthetic.noise", fmt(c.synthetic->noise));
    kv("synthetic.size", std::to_string(c.synthetic->size));
    kv("synthetic.seed", std::to_string(c.synthetic->seed));
    kv("synthetic.lang_a", c.synthetic->lang_a);
    kv("synthetic.lang_b", c.synthetic->lang_b);
  }
  for (const auto& [lang, paths] : c.data) {
    kv("data." + lang + ".train", paths.train.string());
    kv("data." + lang + ".test", paths.test.string());
  }
  for (const auto& [id, pc] : c.provider_configs) {
    const std::string p = "provider." + id + ".";
    kv(p + "kind", to_string(pc.kind));
    kv(p + "endpoint", pc.endpoint);
    kv(p + "credential_env", pc.credential_env);
    kv(p + "region", pc.region);
    kv(p + "rate_limit", fmt(pc.rate_limit));
    kv(p + "texts_per_request", std::to_string(pc.texts_per_request));
    kv(p + "max_attempts", std::to_string(pc.retry.max_attempts));
    kv(p + "backoff_base_s", fmt(pc.retry.backoff_base_s));
  }
  return os.str();
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["mode"] = to_string(c.mode);
  j["train_langs"] = c.train_langs;
  j["test_lang"] = c.test_lang;
  j["translation"] = to_string(c.translation);
  j["providers"] = c.providers;
  j["mix_with"] = to_string(c.mix_with);
  j["mix_fractions"] = c.mix_fractions;
  j["seeds"] = c.seeds;
  j["freeze_prefixes"] = c.freeze_prefixes;
  j["vocab_size"] = c.vocab_size;
  j["model"] = {{"n_layers", c.model.n_layers}, {"d_model", c.model.d_model}, {"n_heads", c.model.n_heads},
                {"d_ff", c.model.d_ff},         {"max_len", c.model.max_len}, {"dropout", c.model.dropout_rate}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"threshold", c.train.threshold},
                {"pool", std::string(to_string(c.train.pool_mode))},
                {"weight_decay", c.train.weight_decay},
                {"clip_norm", c.train.clip_norm}};
  j["schedule"] = {{"lr_min", c.schedule.lr_min}, {"lr_max", c.schedule.lr_max}, {"stepsize", c.schedule.stepsize}};
  j["pretrain"] = {{"steps", c.pretrain.steps},
                   {"batch_size", c.pretrain.batch_size},
                   {"mask_rate", c.pretrain.mask_rate},
                   {"lr", c.pretrain.lr}};
  if (c.synthetic) {
    j["synthetic"] = {{"overlap", c.synthetic->overlap}, {"noise", c.synthetic->noise},
                      {"size", c.synthetic->size},       {"seed", c.synthetic->seed},
                      {"lang_a", c.synthetic->lang_a},   {"lang_b", c.synthetic->lang_b}};
  }
  nlohmann::json data = nlohmann::json::object();
  for (const auto& [lang, p] : c.data) data[lang] = {{"train", p.train.string()}, {"test", p.test.string()}};
  j["data"] = data;
  nlohmann::json providers = nlohmann::json::object();
  for (const auto& [id, pc] : c.provider_configs) providers[id] = to_json(pc);
  j["provider_configs"] = providers;
  j["cache"] = c.cache.string();
  j["offline"] = c.offline;
  j["text"] = config_text(c);
  return j;
}

}  // namespace xlt
