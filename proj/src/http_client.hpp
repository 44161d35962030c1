#pragma once

// Internal helpers shared by the HTTP-speaking backends.

#include <httplib.h>

#include <string>
#include <utility>

#include "raec/error.hpp"
#include "raec/io.hpp"

namespace raec::detail {

/// Splits "http://host:port/path" into ("http://host:port", "/path").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("URL needs a scheme: " + url);
  if (url.compare(0, scheme, "http") != 0) {
    throw ConfigError("only http:// endpoints are supported: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// POSTs JSON and returns the parsed body. Transport failures, timeouts and
/// non-2xx statuses become BackendError.
inline Json post_json(const std::string& base_url, const std::string& path, const Json& body,
                      const std::string& api_key, int timeout_ms) {
  httplib::Client client(base_url);
  const auto sec = timeout_ms / 1000;
  const auto usec = (timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    throw BackendError(timeout ? BackendError::Kind::kTimeout : BackendError::Kind::kUnavailable,
                       base_url + path + ": " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(res->status >= 500 ? BackendError::Kind::kUnavailable
                                          : BackendError::Kind::kProtocol,
                       base_url + path + ": HTTP " + std::to_string(res->status));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error&) {
    throw BackendError(BackendError::Kind::kProtocol, base_url + path + ": response is not JSON");
  }
}

}  // namespace raec::detail
