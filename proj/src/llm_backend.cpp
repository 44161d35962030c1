#include "raec/llm_backend.hpp"

#include "http_client.hpp"
#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

std::string Prompt::digest() const {
  std::string canonical;
  for (const auto& p : parts) {
    canonical += p.role;
    canonical.push_back('\x1f');
    canonical += p.content;
    canonical.push_back('\x1e');
  }
  return sha256_hex(canonical);
}

std::string Prompt::flattened() const {
  std::string out;
  for (const auto& p : parts) {
    out += p.content;
    out.push_back('\n');
  }
  return out;
}

namespace {

std::string response_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::vector<std::string> string_list(const Json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw ValidationError(std::string("rule field '") + key + "' must be an array");
  for (const auto& s : j[key]) {
    if (!s.is_string()) throw ValidationError(std::string("rule field '") + key + "' must hold strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

}  // namespace

ScriptedBackend ScriptedBackend::from_json(const Json& fixture) {
  if (!fixture.is_object()) throw ValidationError("scripted backend fixture must be an object");
  ScriptedBackend b;
  b.model_id_ = fixture.value("model_id", std::string("scripted"));
  if (fixture.contains("by_digest")) {
    for (const auto& [digest, response] : fixture["by_digest"].items()) {
      b.by_digest_[digest] = response_text(response);
    }
  }
  if (fixture.contains("by_ordinal")) {
    for (const auto& response : fixture["by_ordinal"]) b.by_ordinal_.push_back(response_text(response));
  }
  if (fixture.contains("rules")) {
    for (const auto& r : fixture["rules"]) {
      if (!r.is_object() || !r.contains("response")) {
        throw ValidationError("scripted rule needs a response");
      }
      b.rules_.push_back({r.value("purpose", std::string{}), string_list(r, "all"),
                          string_list(r, "none"), response_text(r["response"])});
    }
  }
  if (fixture.contains("default")) {
    for (const auto& [purpose, response] : fixture["default"].items()) {
      b.defaults_[purpose] = response_text(response);
    }
  }
  return b;
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(read_text_file(path)));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed fixture: " + e.what());
  }
}

ScriptedBackend& ScriptedBackend::set_model_id(std::string id) {
  model_id_ = std::move(id);
  return *this;
}

ScriptedBackend& ScriptedBackend::add_digest_response(std::string digest, std::string response) {
  by_digest_[std::move(digest)] = std::move(response);
  return *this;
}

ScriptedBackend& ScriptedBackend::add_ordinal_response(std::string response) {
  by_ordinal_.push_back(std::move(response));
  return *this;
}

ScriptedBackend& ScriptedBackend::add_rule(Rule rule) {
  rules_.push_back(std::move(rule));
  return *this;
}

ScriptedBackend& ScriptedBackend::set_default(std::string purpose, std::string response) {
  defaults_[std::move(purpose)] = std::move(response);
  return *this;
}

std::string ScriptedBackend::generate(const Prompt& prompt) {
  size_t ordinal = 0;
  {
    std::lock_guard<std::mutex> lock(*mutex_);
    ordinal = transcript_.size();
    transcript_.push_back(prompt);
    ++calls_by_purpose_[prompt.purpose];
  }
  if (!by_digest_.empty()) {
    auto it = by_digest_.find(prompt.digest());
    if (it != by_digest_.end()) return it->second;
  }
  if (ordinal < by_ordinal_.size()) return by_ordinal_[ordinal];
  if (!rules_.empty()) {
    const auto text = prompt.flattened();
    for (const auto& rule : rules_) {
      if (!rule.purpose.empty() && rule.purpose != prompt.purpose) continue;
      bool ok = true;
      for (const auto& s : rule.all) ok = ok && text.find(s) != std::string::npos;
      for (const auto& s : rule.none) ok = ok && text.find(s) == std::string::npos;
      if (ok) return rule.response;
    }
  }
  auto it = defaults_.find(prompt.purpose);
  if (it != defaults_.end()) return it->second;
  throw BackendError(BackendError::Kind::kProtocol,
                     "scripted backend has no response for call " + std::to_string(ordinal) +
                         " (" + prompt.purpose + ", digest " + prompt.digest() + ")");
}

size_t ScriptedBackend::call_count() const {
  std::lock_guard<std::mutex> lock(*mutex_);
  return transcript_.size();
}

size_t ScriptedBackend::call_count(const std::string& purpose) const {
  std::lock_guard<std::mutex> lock(*mutex_);
  auto it = calls_by_purpose_.find(purpose);
  return it == calls_by_purpose_.end() ? 0 : it->second;
}

std::vector<Prompt> ScriptedBackend::transcript() const {
  std::lock_guard<std::mutex> lock(*mutex_);
  return transcript_;
}

LlmConfig LlmConfig::from_json(const Json& j) {
  LlmConfig c;
  c.kind = j.value("kind", c.kind);
  c.fixture_path = j.value("fixture_path", c.fixture_path);
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model = j.value("model", c.model);
  c.api_key = j.value("api_key", c.api_key);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_retries = j.value("max_retries", c.max_retries);
  if (c.kind != "scripted" && c.kind != "http") throw ConfigError("unknown llm kind: " + c.kind);
  if (c.timeout_ms <= 0) throw ConfigError("llm timeout_ms must be positive");
  if (c.max_retries < 0) throw ConfigError("llm max_retries must be >= 0");
  return c;
}

HttpChatBackend::HttpChatBackend(LlmConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("http llm backend needs an endpoint");
  std::tie(base_url_, path_) = detail::split_url(config_.endpoint);
}

std::string HttpChatBackend::generate(const Prompt& prompt) {
  Json body;
  body["model"] = config_.model;
  body["messages"] = Json::array();
  for (const auto& p : prompt.parts) {
    body["messages"].push_back({{"role", p.role}, {"content", p.content}});
  }
  for (int attempt = 0;; ++attempt) {
    try {
      const auto reply =
          detail::post_json(base_url_, path_, body, config_.api_key, config_.timeout_ms);
      if (!reply.is_object() || !reply.contains("content") || !reply["content"].is_string()) {
        throw BackendError(BackendError::Kind::kProtocol, "chat response lacks string 'content'");
      }
      return reply["content"].get<std::string>();
    } catch (const BackendError& e) {
      if (e.kind() == BackendError::Kind::kProtocol || attempt >= config_.max_retries) throw;
    }
  }
}

std::unique_ptr<LlmBackend> make_backend(const LlmConfig& config) {
  if (config.kind == "http") return std::make_unique<HttpChatBackend>(config);
  if (config.fixture_path.empty()) throw ConfigError("scripted llm backend needs fixture_path");
  return std::make_unique<ScriptedBackend>(ScriptedBackend::load(config.fixture_path));
}

}  // namespace raec
