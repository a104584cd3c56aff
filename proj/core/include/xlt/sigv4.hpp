#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xlt::sigv4 {

struct Credentials {
  std::string access_key_id;
  std::string secret_access_key;
  std::string session_token;
};

struct Request {
  std::string method = "POST";
  std::string path = "/";
  std::vector<std::pair<std::string, std::string>> query;
  std::vector<std::pair<std::string, std::string>> headers;  // must include host and x-amz-date
  std::string payload;
};

std::string hex(std::string_view bytes);
std::string sha256(std::string_view data);  // raw digest
std::string hmac_sha256(std::string_view key, std::string_view data);  // raw digest
std::string uri_encode(std::string_view s, bool encode_slash = true);

std::string canonical_request(const Request& request);
std::string string_to_sign(const Request& request, std::string_view amz_date, std::string_view region,
                           std::string_view service);
std::string signing_key(std::string_view secret, std::string_view date, std::string_view region,
                        std::string_view service);  // raw
std::string signature(const Request& request, const Credentials& creds, std::string_view amz_date,
                      std::string_view region, std::string_view service);
std::string authorization_header(const Request& request, const Credentials& creds,
                                 std::string_view amz_date, std::string_view region,
                                 std::string_view service);

}  // namespace xlt::sigv4
