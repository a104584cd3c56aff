#include "xlt/translate.hpp"

#include "xlt/errors.hpp"

#include <ctime>
#include <thread>

namespace xlt {

nlohmann::json to_json(const TranslationRecord& r) {
  return {{"source_text", r.source_text},   {"source_lang", r.source_lang},
          {"target_lang", r.target_lang},   {"provider", r.provider},
          {"translated_text", r.translated_text}, {"retrieved_at", r.retrieved_at}};
}

TranslationRecord record_from_json(const nlohmann::json& j) {
  TranslationRecord r;
  r.source_text = j.at("source_text").get<std::string>();
  r.source_lang = j.at("source_lang").get<std::string>();
  r.target_lang = j.at("target_lang").get<std::string>();
  r.provider = j.at("provider").get<std::string>();
  r.translated_text = j.at("translated_text").get<std::string>();
  r.retrieved_at = j.value("retrieved_at", std::string{});
  if (r.translated_text.empty()) throw DataError("cache record with empty translated_text");
  return r;
}

TranslationCache::TranslationCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_, std::ios::binary);
  if (!in) return;  // created on first append
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      TranslationRecord r = record_from_json(nlohmann::json::parse(line));
      Key key{r.source_text, r.source_lang, r.target_lang, r.provider};
      records_.insert_or_assign(std::move(key), std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path_->string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::optional<TranslationRecord> TranslationCache::lookup(const std::string& text,
                                                          const std::string& source_lang,
                                                          const std::string& target_lang,
                                                          const std::string& provider) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(Key{text, source_lang, target_lang, provider});
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void TranslationCache::append(const TranslationRecord& record) {
  if (record.translated_text.empty()) throw DataError("refusing to cache an empty translation");
  std::lock_guard lock(mutex_);
  if (path_) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot open translation cache " + path_->string());
    const std::string line = to_json(record).dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw DataError("failed writing translation cache " + path_->string());
  }
  records_.insert_or_assign(Key{record.source_text, record.source_lang, record.target_lang, record.provider},
                            record);
}

std::size_t TranslationCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::fake: return "fake";
    case ProviderKind::google: return "google";
    case ProviderKind::amazon: return "amazon";
  }
  return "fake";
}

ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "fake") return ProviderKind::fake;
  if (s == "google") return ProviderKind::google;
  if (s == "amazon") return ProviderKind::amazon;
  throw ConfigError("unknown provider kind '" + std::string(s) + "'");
}

void ProviderConfig::validate() const {
  if (id.empty()) throw ConfigError("provider id must be non-empty");
  if (id.find('#') != std::string::npos) throw ConfigError("provider id may not contain '#'");
  if (!(rate_limit > 0.0)) throw ConfigError("provider " + id + ": rate limit must be positive");
  if (texts_per_request < 1) throw ConfigError("provider " + id + ": texts_per_request must be >= 1");
  if (retry.max_attempts < 1) throw ConfigError("provider " + id + ": max_attempts must be >= 1");
  if (retry.backoff_base_s < 0.0) throw ConfigError("provider " + id + ": negative backoff");
}

nlohmann::json to_json(const ProviderConfig& c) {
  return {{"id", c.id},
          {"kind", to_string(c.kind)},
          {"endpoint", c.endpoint},
          {"credential_env", c.credential_env},
          {"region", c.region},
          {"rate_limit", c.rate_limit},
          {"texts_per_request", c.texts_per_request},
          {"retry", {{"max_attempts", c.retry.max_attempts}, {"backoff_base_s", c.retry.backoff_base_s}}}};
}

ProviderConfig provider_config_from_json(const nlohmann::json& j) {
  ProviderConfig c;
  c.id = j.at("id").get<std::string>();
  c.kind = parse_provider_kind(j.value("kind", std::string("fake")));
  c.endpoint = j.value("endpoint", std::string{});
  c.credential_env = j.value("credential_env", std::string{});
  c.region = j.value("region", c.region);
  c.rate_limit = j.value("rate_limit", c.rate_limit);
  c.texts_per_request = j.value("texts_per_request", c.texts_per_request);
  if (j.contains("retry")) {
    c.retry.max_attempts = j["retry"].value("max_attempts", c.retry.max_attempts);
    c.retry.backoff_base_s = j["retry"].value("backoff_base_s", c.retry.backoff_base_s);
  }
  c.validate();
  return c;
}

Provider::Provider(ProviderConfig config) : config_(std::move(config)) { config_.validate(); }

void Provider::pace() {
  std::lock_guard lock(pace_mutex_);
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config_.rate_limit));
  if (last_request_) {
    const auto next = *last_request_ + interval;
    if (std::chrono::steady_clock::now() < next) std::this_thread::sleep_until(next);
  }
  last_request_ = std::chrono::steady_clock::now();
}

std::vector<std::string> Provider::request(std::span<const std::string> texts, const std::string& source_lang,
                                           const std::string& target_lang) {
  for (int attempt = 1;; ++attempt) {
    pace();
    ++requests_;
    try {
      auto out = translate_request(texts, source_lang, target_lang);
      if (out.size() != texts.size()) {
        throw ProviderError(id() + ": expected " + std::to_string(texts.size()) + " translations, got " +
                            std::to_string(out.size()));
      }
      for (const auto& t : out) {
        if (t.empty()) throw ProviderError(id() + ": empty translation returned");
      }
      return out;
    } catch (const TransientError& e) {
      if (attempt >= config_.retry.max_attempts) {
        throw ProviderError(id() + ": giving up after " + std::to_string(attempt) + " attempts: " + e.what());
      }
      const double wait = config_.retry.backoff_base_s * static_cast<double>(1ULL << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
  }
}

std::vector<TranslationRecord> translate_batch(std::span<const std::string> texts,
                                               const std::string& source_lang,
                                               const std::string& target_lang, Provider& provider,
                                               TranslationCache& cache, bool offline) {
  if (texts.empty()) throw DataError("translate_batch needs at least one text");
  std::vector<std::optional<TranslationRecord>> out(texts.size());
  std::vector<std::size_t> missing;
  // Identical texts in one batch are fetched once.
  std::map<std::string, std::vector<std::size_t>, std::less<>> pending;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out[i] = cache.lookup(texts[i], source_lang, target_lang, provider.id());
    if (out[i]) continue;
    if (offline) {
      throw CacheMissError("offline cache miss for provider " + provider.id() + " (" + source_lang + "->" +
                           target_lang + "): \"" + texts[i] + "\"");
    }
    auto& slots = pending[texts[i]];
    if (slots.empty()) missing.push_back(i);
    slots.push_back(i);
  }
  const std::size_t chunk = provider.config().texts_per_request;
  for (std::size_t start = 0; start < missing.size(); start += chunk) {
    const std::size_t end = std::min(missing.size(), start + chunk);
    std::vector<std::string> request;
    for (std::size_t m = start; m < end; ++m) request.push_back(texts[missing[m]]);
    const auto translated = provider.request(request, source_lang, target_lang);
    const std::string now = utc_timestamp();
    for (std::size_t m = start; m < end; ++m) {
      TranslationRecord r{request[m - start], source_lang, target_lang, provider.id(), translated[m - start], now};
      cache.append(r);
      for (std::size_t slot : pending[r.source_text]) out[slot] = r;
    }
  }
  std::vector<TranslationRecord> records;
  records.reserve(out.size());
  for (auto& r : out) records.push_back(std::move(*r));
  return records;
}

Dataset build_translated_dataset(const Dataset& source, const std::string& target_lang,
                                 std::span<Provider* const> providers, TranslationCache& cache,
                                 bool offline) {
  if (providers.empty()) throw ConfigError("at least one provider is required");
  if (source.empty()) return Dataset({}, source.split());
  const std::string& source_lang = source.examples().front().lang;
  for (const auto& ex : source.examples()) {
    if (ex.lang != source_lang) {
      throw DataError("build_translated_dataset: mixed source languages '" + source_lang + "' and '" + ex.lang + "'");
    }
  }
  if (source_lang == target_lang) throw ConfigError("source and target language are both '" + target_lang + "'");
  const auto texts = source.texts();
  std::vector<Example> examples;
  examples.reserve(source.size() * providers.size());
  for (Provider* provider : providers) {
    const auto records = translate_batch(texts, source_lang, target_lang, *provider, cache, offline);
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Example& src = source.examples()[i];
      Example ex;
      ex.id = src.id + "#" + provider->id();
      ex.lang = target_lang;
      ex.text = records[i].translated_text;
      ex.labels = src.labels;
      ex.origin = Origin{Origin::Kind::translated, provider->id(), source_lang};
      examples.push_back(std::move(ex));
    }
  }
  return Dataset(std::move(examples), source.split());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace xlt
