#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "raec/io.hpp"
#include "raec/limiter.hpp"

namespace raec {

struct PromptPart {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

/// Role-tagged prompt plus a purpose label ("stage1", "stage2", "induction").
/// The purpose is routing metadata for instrumentation; it is not part of the digest.
struct Prompt {
  std::string purpose;
  std::vector<PromptPart> parts;

  /// SHA-256 over role/content pairs in order.
  std::string digest() const;
  /// All part contents joined by newlines.
  std::string flattened() const;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Returns the model's raw text. Throws BackendError on transport failure.
  virtual std::string generate(const Prompt& prompt) = 0;
  virtual std::string model_id() const = 0;
};

/// Replays a fixture deterministically. Resolution order for each call:
///   1. by_digest[prompt digest]
///   2. by_ordinal[call ordinal] (0-based, counted across all calls)
///   3. first rule whose purpose matches and whose `all` substrings are all present
///      and `none` substrings all absent in the flattened prompt
///   4. default[purpose]
/// Responses may be strings or JSON values (serialized compactly).
///
/// Fixture file:
///   {"model_id": "...", "by_digest": {...}, "by_ordinal": [...],
///    "rules": [{"purpose": "stage1", "all": [...], "none": [...], "response": ...}],
///    "default": {"stage1": ..., "stage2": ...}}
class ScriptedBackend : public LlmBackend {
 public:
  struct Rule {
    std::string purpose;  // empty matches any purpose
    std::vector<std::string> all;
    std::vector<std::string> none;
    std::string response;
  };

  ScriptedBackend() = default;
  static ScriptedBackend from_json(const Json& fixture);
  static ScriptedBackend load(const std::filesystem::path& path);

  ScriptedBackend& set_model_id(std::string id);
  ScriptedBackend& add_digest_response(std::string digest, std::string response);
  ScriptedBackend& add_ordinal_response(std::string response);
  ScriptedBackend& add_rule(Rule rule);
  ScriptedBackend& set_default(std::string purpose, std::string response);

  std::string generate(const Prompt& prompt) override;
  std::string model_id() const override { return model_id_; }

  size_t call_count() const;
  size_t call_count(const std::string& purpose) const;
  /// Prompts in call order.
  std::vector<Prompt> transcript() const;

 private:
  std::string model_id_ = "scripted";
  std::map<std::string, std::string> by_digest_;
  std::vector<std::string> by_ordinal_;
  std::vector<Rule> rules_;
  std::map<std::string, std::string> defaults_;

  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  std::vector<Prompt> transcript_;
  std::map<std::string, size_t> calls_by_purpose_;
};

/// Backend driven by a callback; handy for property tests.
class FunctionBackend : public LlmBackend {
 public:
  using Responder = std::function<std::string(const Prompt&)>;

  explicit FunctionBackend(Responder responder, std::string model_id = "function")
      : responder_(std::move(responder)), model_id_(std::move(model_id)) {}

  std::string generate(const Prompt& prompt) override { return responder_(prompt); }
  std::string model_id() const override { return model_id_; }

 private:
  Responder responder_;
  std::string model_id_;
};

struct LlmConfig {
  std::string kind = "scripted";  // "scripted" | "http"
  std::string fixture_path;       // scripted
  std::string endpoint;           // http: full URL of the chat route
  std::string model = "default";
  std::string api_key;
  int timeout_ms = 60000;
  int max_retries = 2;

  static LlmConfig from_json(const Json& j);
};

/// Chat-style POST {model, messages:[{role, content}]} -> {content}.
/// Retries transport failures and 5xx up to max_retries times.
class HttpChatBackend : public LlmBackend {
 public:
  explicit HttpChatBackend(LlmConfig config);

  std::string generate(const Prompt& prompt) override;
  std::string model_id() const override { return config_.model; }

 private:
  LlmConfig config_;
  std::string base_url_;
  std::string path_;
};

/// Bounds concurrent calls into the wrapped backend.
class LimitedBackend : public LlmBackend {
 public:
  LimitedBackend(LlmBackend& inner, size_t max_in_flight)
      : inner_(inner), limiter_(max_in_flight) {}

  std::string generate(const Prompt& prompt) override {
    InFlightLimiter::Permit permit(limiter_);
    return inner_.generate(prompt);
  }
  std::string model_id() const override { return inner_.model_id(); }
  const InFlightLimiter& limiter() const { return limiter_; }

 private:
  LlmBackend& inner_;
  InFlightLimiter limiter_;
};

std::unique_ptr<LlmBackend> make_backend(const LlmConfig& config);

}  // namespace raec
