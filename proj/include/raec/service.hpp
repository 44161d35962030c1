#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "raec/embedding.hpp"
#include "raec/io.hpp"
#include "raec/judge.hpp"
#include "raec/llm_backend.hpp"
#include "raec/prompts.hpp"
#include "raec/retrieval.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

/// Service configuration file. Relative paths resolve against the directory of
/// the file they were read from. Secrets may come from the environment:
/// RAEC_LLM_API_KEY, RAEC_EMBEDDER_API_KEY, RAEC_BEARER_TOKEN.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  Mode default_mode = Mode::kBaseline;
  size_t k = kMaxExemplars;
  std::filesystem::path taxonomy_path;
  std::filesystem::path prompts_path;
  std::filesystem::path index_path;  // prefix; empty disables enhanced mode
  LlmConfig llm;
  std::optional<EmbedderConfig> embedder;  // defaults to the index manifest's embedder
  size_t max_in_flight = 4;
  int request_timeout_ms = 60000;
  std::string bearer_token;
  bool fail_on_retrieval_error = false;
  bool relax_filters = false;
  bool record_timings = true;

  static ServiceConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& path);
  /// Fills secrets from the environment where the file left them empty.
  void apply_env();
};

struct HttpReply {
  int status = 200;
  Json body;
};

/// Request handlers independent of the HTTP library. Shared state is immutable
/// after construction; backend calls go through one in-flight limiter.
class GuardrailService {
 public:
  struct Parts {
    Taxonomy taxonomy;
    PromptTemplates templates;
    std::unique_ptr<LlmBackend> backend;
    std::optional<Index> index;
    std::unique_ptr<Embedder> embedder;  // required with an index
  };

  GuardrailService(Parts parts, const ServiceConfig& config);
  GuardrailService(const GuardrailService&) = delete;
  GuardrailService& operator=(const GuardrailService&) = delete;

  /// Loads and validates everything named by the config; throws on any failure.
  static std::unique_ptr<GuardrailService> from_config(const ServiceConfig& config);

  HttpReply check(const std::string& body) const;
  HttpReply retrieve(const std::string& body) const;
  HttpReply taxonomy() const;
  HttpReply health() const;

  /// Empty token means authorization is off.
  bool authorized(const std::string& authorization_header) const;

  void set_logger(std::function<void(const std::string&)> log) { log_ = std::move(log); }

  const Taxonomy& active_taxonomy() const { return parts_.taxonomy; }

 private:
  Parts parts_;
  ServiceConfig config_;
  std::unique_ptr<LimitedBackend> limited_;
  std::unique_ptr<Retriever> retriever_;
  std::unique_ptr<Guardrail> guardrail_;
  std::function<void(const std::string&)> log_;
};

/// Maps a library exception to a status and a structured error body
/// {"error": {"reason", "message", "field"?}}.
HttpReply error_reply(const std::exception& e);

/// Runs the routes on a background thread.
class ServiceServer {
 public:
  explicit ServiceServer(const GuardrailService& service);
  ~ServiceServer();
  ServiceServer(const ServiceServer&) = delete;
  ServiceServer& operator=(const ServiceServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from elsewhere or the listener fails.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace raec
