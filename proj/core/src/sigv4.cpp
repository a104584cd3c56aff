#include "xlt/sigv4.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace xlt::sigv4 {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  std::string out;
  bool space = false;
  for (char c : s.substr(b, e - b + 1)) {
    if (c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> sorted_headers(const Request& r) {
  std::vector<std::pair<std::string, std::string>> h;
  for (const auto& [k, v] : r.headers) h.emplace_back(lower(k), trim(v));
  std::sort(h.begin(), h.end());
  return h;
}

std::string signed_headers(const Request& r) {
  std::string out;
  for (const auto& [k, v] : sorted_headers(r)) {
    if (!out.empty()) out += ';';
    out += k;
  }
  return out;
}

std::string header_value(const Request& r, std::string_view name) {
  for (const auto& [k, v] : r.headers) {
    if (lower(k) == name) return trim(v);
  }
  throw std::invalid_argument("sigv4 request is missing header " + std::string(name));
}

}  // namespace

std::string hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

std::string sha256(std::string_view data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
  return {reinterpret_cast<const char*>(md), SHA256_DIGEST_LENGTH};
}

std::string hmac_sha256(std::string_view key, std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
       reinterpret_cast<const unsigned char*>(data.data()), data.size(), md, &len);
  return {reinterpret_cast<const char*>(md), len};
}

std::string uri_encode(std::string_view s, bool encode_slash) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || (c == '/' && !encode_slash)) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kDigits[c >> 4]);
      out.push_back(kDigits[c & 0xf]);
    }
  }
  return out;
}

std::string canonical_request(const Request& r) {
  std::vector<std::pair<std::string, std::string>> q;
  for (const auto& [k, v] : r.query) q.emplace_back(uri_encode(k), uri_encode(v));
  std::sort(q.begin(), q.end());
  std::string query;
  for (const auto& [k, v] : q) {
    if (!query.empty()) query += '&';
    query += k + '=' + v;
  }
  std::string headers;
  for (const auto& [k, v] : sorted_headers(r)) headers += k + ':' + v + '\n';
  return r.method + '\n' + uri_encode(r.path.empty() ? "/" : r.path, false) + '\n' + query + '\n' +
         headers + '\n' + signed_headers(r) + '\n' + hex(sha256(r.payload));
}

std::string string_to_sign(const Request& r, std::string_view amz_date, std::string_view region,
                           std::string_view service) {
  const std::string date(amz_date.substr(0, 8));
  return "AWS4-HMAC-SHA256\n" + std::string(amz_date) + '\n' + date + '/' + std::string(region) + '/' +
         std::string(service) + "/aws4_request\n" + hex(sha256(canonical_request(r)));
}

std::string signing_key(std::string_view secret, std::string_view date, std::string_view region,
                        std::string_view service) {
  const std::string k_date = hmac_sha256("AWS4" + std::string(secret), date);
  const std::string k_region = hmac_sha256(k_date, region);
  const std::string k_service = hmac_sha256(k_region, service);
  return hmac_sha256(k_service, "aws4_request");
}

std::string signature(const Request& r, const Credentials& creds, std::string_view amz_date,
                      std::string_view region, std::string_view service) {
  if (header_value(r, "x-amz-date") != amz_date) {
    throw std::invalid_argument("x-amz-date header does not match the signing date");
  }
  const std::string key = signing_key(creds.secret_access_key, amz_date.substr(0, 8), region, service);
  return hex(hmac_sha256(key, string_to_sign(r, amz_date, region, service)));
}

std::string authorization_header(const Request& r, const Credentials& creds, std::string_view amz_date,
                                 std::string_view region, std::string_view service) {
  const std::string date(amz_date.substr(0, 8));
  return "AWS4-HMAC-SHA256 Credential=" + creds.access_key_id + '/' + date + '/' + std::string(region) +
         '/' + std::string(service) + "/aws4_request, SignedHeaders=" + signed_headers(r) +
         ", Signature=" + signature(r, creds, amz_date, region, service);
}

}  // namespace xlt::sigv4
