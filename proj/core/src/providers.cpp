#include "xlt/errors.hpp"
#include "xlt/random.hpp"
#include "xlt/sigv4.hpp"
#include "xlt/translate.hpp"

#include <httplib.h>

#include <cstdlib>
#include <ctime>
#include <sstream>

namespace xlt {

namespace {

struct Endpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path without trailing slash
  std::string host;    // host[:port] as sent in the Host header
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.base = url.substr(0, path_start);
  e.host = e.base.substr(scheme_end + 3);
  if (path_start != std::string::npos) e.prefix = url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

std::string env_or_throw(const std::string& name, const std::string& provider) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr || *v == '\0') {
    throw ProviderError(provider + ": credential environment variable " + name + " is not set");
  }
  return v;
}

// Status codes worth retrying map to TransientError; the message carries the
// status only, never the request URL (it may contain a key).
void check_response(const httplib::Result& res, const std::string& provider) {
  if (!res) throw TransientError(provider + ": request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientError(provider + ": HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError(provider + ": HTTP " + std::to_string(res->status));
  }
}

std::unique_ptr<httplib::Client> make_client(const Endpoint& e) {
  auto client = std::make_unique<httplib::Client>(e.base);
  client->set_connection_timeout(10);
  client->set_read_timeout(60);
  client->set_write_timeout(60);
  return client;
}

std::string amz_date_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[20];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream is(text);
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

}  // namespace

FakeProvider::FakeProvider(ProviderConfig config, std::vector<FakeDictionary> dictionaries, double noise,
                           std::uint64_t seed)
    : Provider(std::move(config)), dictionaries_(std::move(dictionaries)), noise_(noise), seed_(seed) {
  if (noise_ < 0.0 || noise_ > 1.0) throw ConfigError("fake provider noise must lie in [0, 1]");
}

const FakeDictionary& FakeProvider::dictionary(const std::string& source_lang,
                                               const std::string& target_lang) const {
  for (const auto& d : dictionaries_) {
    if (d.source_lang == source_lang && d.target_lang == target_lang) return d;
  }
  throw ProviderError(id() + ": no dictionary for " + source_lang + "->" + target_lang);
}

std::string FakeProvider::translate_text(const std::string& text, const std::string& source_lang,
                                         const std::string& target_lang) const {
  const FakeDictionary& dict = dictionary(source_lang, target_lang);
  const std::uint64_t text_hash = hash_string(text);
  std::string out;
  const auto words = split_words(text);
  for (std::size_t pos = 0; pos < words.size(); ++pos) {
    std::string_view chosen = words[pos];
    if (const auto it = dict.words.find(words[pos]); it != dict.words.end()) {
      chosen = it->second.translation;
      const auto& alts = it->second.alternatives;
      if (!alts.empty()) {
        const std::uint64_t h = hash_mix(seed_, text_hash, pos);
        if (unit_from_bits(h) < noise_) chosen = alts[hash_mix(h, 0xa17ULL) % alts.size()];
      }
    }
    if (!out.empty()) out += ' ';
    out += chosen;
  }
  return out;
}

std::vector<std::string> FakeProvider::translate_request(std::span<const std::string> texts,
                                                         const std::string& source_lang,
                                                         const std::string& target_lang) {
  for (std::size_t f = failures_.load(); f > 0; f = failures_.load()) {
    if (failures_.compare_exchange_weak(f, f - 1)) throw TransientError(id() + ": injected failure");
  }
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(translate_text(t, source_lang, target_lang));
  return out;
}

nlohmann::json fake_provider_to_json(const FakeProvider& provider) {
  nlohmann::json dicts = nlohmann::json::array();
  for (const auto& d : provider.dictionaries()) {
    nlohmann::json words = nlohmann::json::object();
    for (const auto& [w, e] : d.words) words[w] = {{"to", e.translation}, {"alt", e.alternatives}};
    dicts.push_back({{"source_lang", d.source_lang}, {"target_lang", d.target_lang}, {"words", words}});
  }
  return {{"id", provider.id()}, {"noise", provider.noise()}, {"seed", provider.seed()}, {"dictionaries", dicts}};
}

void save_fake_provider(const FakeProvider& provider, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << fake_provider_to_json(provider).dump(1) << '\n';
}

std::vector<std::string> GoogleProvider::translate_request(std::span<const std::string> texts,
                                                           const std::string& source_lang,
                                                           const std::string& target_lang) {
  const std::string env = config().credential_env.empty() ? "GOOGLE_API_KEY" : config().credential_env;
  const std::string key = env_or_throw(env, id());
  const Endpoint e =
      split_endpoint(config().endpoint.empty() ? "https://translation.googleapis.com" : config().endpoint);
  nlohmann::json body = {{"q", std::vector<std::string>(texts.begin(), texts.end())},
                         {"source", source_lang},
                         {"target", target_lang},
                         {"format", "text"}};
  auto client = make_client(e);
  const std::string path = e.prefix + "/language/translate/v2?key=" + sigv4::uri_encode(key);
  const auto res = client->Post(path, body.dump(), "application/json");
  check_response(res, id());
  try {
    const auto j = nlohmann::json::parse(res->body);
    std::vector<std::string> out;
    for (const auto& t : j.at("data").at("translations")) out.push_back(t.at("translatedText").get<std::string>());
    return out;
  } catch (const nlohmann::json::exception& ex) {
    throw ProviderError(id() + ": malformed response: " + ex.what());
  }
}

std::vector<std::string> AmazonProvider::translate_request(std::span<const std::string> texts,
                                                           const std::string& source_lang,
                                                           const std::string& target_lang) {
  const std::string prefix = config().credential_env.empty() ? "AWS" : config().credential_env;
  sigv4::Credentials creds;
  creds.access_key_id = env_or_throw(prefix + "_ACCESS_KEY_ID", id());
  creds.secret_access_key = env_or_throw(prefix + "_SECRET_ACCESS_KEY", id());
  if (const char* token = std::getenv((prefix + "_SESSION_TOKEN").c_str())) creds.session_token = token;
  const Endpoint e = split_endpoint(config().endpoint.empty()
                                        ? "https://translate." + config().region + ".amazonaws.com"
                                        : config().endpoint);
  auto client = make_client(e);
  std::vector<std::string> out;
  for (const auto& text : texts) {
    const nlohmann::json body = {
        {"Text", text}, {"SourceLanguageCode", source_lang}, {"TargetLanguageCode", target_lang}};
    sigv4::Request req;
    req.method = "POST";
    req.path = e.prefix.empty() ? "/" : e.prefix + "/";
    req.payload = body.dump();
    const std::string amz_date = amz_date_now();
    req.headers = {{"content-type", "application/x-amz-json-1.1"},
                   {"host", e.host},
                   {"x-amz-date", amz_date},
                   {"x-amz-target", "AWSShineFrontendService_20170701.TranslateText"}};
    if (!creds.session_token.empty()) req.headers.emplace_back("x-amz-security-token", creds.session_token);
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) {
      if (k != "host" && k != "content-type") headers.emplace(k, v);
    }
    headers.emplace("Authorization", sigv4::authorization_header(req, creds, amz_date, config().region, "translate"));
    const auto res = client->Post(req.path, headers, req.payload, "application/x-amz-json-1.1");
    check_response(res, id());
    try {
      out.push_back(nlohmann::json::parse(res->body).at("TranslatedText").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
      throw ProviderError(id() + ": malformed response: " + ex.what());
    }
  }
  return out;
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& config) {
  switch (config.kind) {
    case ProviderKind::google: return std::make_unique<GoogleProvider>(config);
    case ProviderKind::amazon: return std::make_unique<AmazonProvider>(config);
    case ProviderKind::fake: break;
  }
  std::ifstream in(config.endpoint, std::ios::binary);
  if (!in) throw ConfigError("fake provider " + config.id + ": cannot open dictionary '" + config.endpoint + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("fake provider dictionary " + config.endpoint + ": " + e.what());
  }
  std::vector<FakeDictionary> dicts;
  for (const auto& d : j.at("dictionaries")) {
    FakeDictionary fd;
    fd.source_lang = d.at("source_lang").get<std::string>();
    fd.target_lang = d.at("target_lang").get<std::string>();
    for (const auto& [w, e] : d.at("words").items()) {
      fd.words.emplace(w, DictEntry{e.at("to").get<std::string>(), e.value("alt", std::vector<std::string>{})});
    }
    dicts.push_back(std::move(fd));
  }
  return std::make_unique<FakeProvider>(config, std::move(dicts), j.value("noise", 0.0),
                                        j.value("seed", std::uint64_t{0}));
}

}  // namespace xlt
