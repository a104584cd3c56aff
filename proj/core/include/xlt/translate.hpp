#pragma once

#include "xlt/corpus.hpp"
#include "xlt/errors.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace xlt {

/// A request that failed for good (bad credentials, malformed response...).
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A request worth retrying (network failure, HTTP 429 or 5xx).
class TransientError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Offline mode and the text is not cached.
class CacheMissError : public DataError {
 public:
  using DataError::DataError;
};

struct TranslationRecord {
  std::string source_text;
  std::string source_lang;
  std::string target_lang;
  std::string provider;
  std::string translated_text;
  std::string retrieved_at;  // ISO 8601 UTC

  bool operator==(const TranslationRecord&) const = default;
};

nlohmann::json to_json(const TranslationRecord& record);
TranslationRecord record_from_json(const nlohmann::json& j);

/// Append-only JSONL cache keyed by (source_text, source_lang, target_lang,
/// provider). Later records override earlier ones with the same key. Appends
/// go through one mutex-guarded writer.
class TranslationCache {
 public:
  TranslationCache() = default;  // in memory only
  explicit TranslationCache(std::filesystem::path path);

  std::optional<TranslationRecord> lookup(const std::string& text, const std::string& source_lang,
                                          const std::string& target_lang,
                                          const std::string& provider) const;
  void append(const TranslationRecord& record);
  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::optional<std::filesystem::path> path_;
  std::map<Key, TranslationRecord> records_;
  mutable std::mutex mutex_;
};

enum class ProviderKind { fake, google, amazon };

std::string to_string(ProviderKind kind);
ProviderKind parse_provider_kind(std::string_view s);

struct RetryPolicy {
  int max_attempts = 4;
  double backoff_base_s = 0.5;  // wait base * 2^(attempt - 1) after a transient failure
};

struct ProviderConfig {
  std::string id;
  ProviderKind kind = ProviderKind::fake;
  /// Base URL for HTTP providers; dictionary file for the fake provider.
  std::string endpoint;
  /// Name of the environment variable (or prefix, for amazon) holding
  /// credentials. The value itself is read at request time only.
  std::string credential_env;
  std::string region = "us-east-1";
  double rate_limit = 5.0;  // requests per second
  std::size_t texts_per_request = 1;
  RetryPolicy retry;

  void validate() const;
};

nlohmann::json to_json(const ProviderConfig& config);
ProviderConfig provider_config_from_json(const nlohmann::json& j);

/// One translation backend. translate_request performs a single request;
/// pacing, retries and caching live in translate_batch.
class Provider {
 public:
  explicit Provider(ProviderConfig config);
  virtual ~Provider() = default;
  Provider(const Provider&) = delete;
  Provider& operator=(const Provider&) = delete;

  const ProviderConfig& config() const { return config_; }
  const std::string& id() const { return config_.id; }
  std::size_t request_count() const { return requests_.load(); }

  std::vector<std::string> request(std::span<const std::string> texts, const std::string& source_lang,
                                   const std::string& target_lang);

  /// Blocks until the next request is allowed by the rate limit.
  void pace();

 protected:
  virtual std::vector<std::string> translate_request(std::span<const std::string> texts,
                                                     const std::string& source_lang,
                                                     const std::string& target_lang) = 0;

 private:
  ProviderConfig config_;
  std::atomic<std::size_t> requests_{0};
  std::mutex pace_mutex_;
  std::optional<std::chrono::steady_clock::time_point> last_request_;
};

/// Word-by-word dictionary entry: the translation, then optional
/// alternatives substituted with probability `noise`.
struct DictEntry {
  std::string translation;
  std::vector<std::string> alternatives;
};

struct FakeDictionary {
  std::string source_lang;
  std::string target_lang;
  std::map<std::string, DictEntry, std::less<>> words;
};

/// Deterministic dictionary-substitution translator. Unknown words pass
/// through unchanged. Noise is a hash of (seed, text, word position).
class FakeProvider : public Provider {
 public:
  FakeProvider(ProviderConfig config, std::vector<FakeDictionary> dictionaries, double noise,
               std::uint64_t seed);

  /// The next `n` requests throw TransientError.
  void inject_failures(std::size_t n) { failures_ = n; }
  std::string translate_text(const std::string& text, const std::string& source_lang,
                             const std::string& target_lang) const;
  double noise() const { return noise_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<FakeDictionary>& dictionaries() const { return dictionaries_; }

 protected:
  std::vector<std::string> translate_request(std::span<const std::string> texts,
                                             const std::string& source_lang,
                                             const std::string& target_lang) override;

 private:
  const FakeDictionary& dictionary(const std::string& source_lang, const std::string& target_lang) const;

  std::vector<FakeDictionary> dictionaries_;
  double noise_;
  std::uint64_t seed_;
  std::atomic<std::size_t> failures_{0};
};

nlohmann::json fake_provider_to_json(const FakeProvider& provider);
void save_fake_provider(const FakeProvider& provider, const std::filesystem::path& path);

/// Google Cloud Translation v2: POST {endpoint}/language/translate/v2?key=...
class GoogleProvider : public Provider {
 public:
  using Provider::Provider;

 protected:
  std::vector<std::string> translate_request(std::span<const std::string> texts,
                                             const std::string& source_lang,
                                             const std::string& target_lang) override;
};

/// Amazon Translate TranslateText with SigV4 signing. Credentials come from
/// {credential_env}_ACCESS_KEY_ID, _SECRET_ACCESS_KEY and optional _SESSION_TOKEN.
class AmazonProvider : public Provider {
 public:
  using Provider::Provider;

 protected:
  std::vector<std::string> translate_request(std::span<const std::string> texts,
                                             const std::string& source_lang,
                                             const std::string& target_lang) override;
};

/// Builds the provider named by the config. The fake provider loads its
/// dictionaries from config.endpoint.
std::unique_ptr<Provider> make_provider(const ProviderConfig& config);

/// Cache first; misses are fetched in chunks of texts_per_request (online
/// only), with pacing and retries, and appended to the cache.
std::vector<TranslationRecord> translate_batch(std::span<const std::string> texts,
                                               const std::string& source_lang,
                                               const std::string& target_lang, Provider& provider,
                                               TranslationCache& cache, bool offline);

/// One translated copy of `source` per provider, concatenated in provider
/// order. Ids become "{id}#{provider}"; labels are copied.
Dataset build_translated_dataset(const Dataset& source, const std::string& target_lang,
                                 std::span<Provider* const> providers, TranslationCache& cache,
                                 bool offline);

std::string utc_timestamp();

}  // namespace xlt
