#include "raec/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

namespace {

std::filesystem::path resolve(const Json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_string()) throw ConfigError(std::string("config field '") + key + "' must be a string");
  std::filesystem::path p = j[key].get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

std::string short_digest(const std::string& text) { return sha256_hex(text).substr(0, 16); }

Json error_body(const std::string& reason, const std::string& message, const std::string& field = {}) {
  Json e = {{"reason", reason}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return Json{{"error", e}};
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("service config must be an object");
  try {
    ServiceConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("mode")) c.default_mode = parse_mode(j["mode"].get<std::string>());
    c.k = j.value("k", c.k);
    c.taxonomy_path = resolve(j, "taxonomy_path", base_dir);
    c.prompts_path = resolve(j, "prompts_path", base_dir);
    c.index_path = resolve(j, "index_path", base_dir);
    if (j.contains("llm")) {
      c.llm = LlmConfig::from_json(j["llm"]);
      if (!c.llm.fixture_path.empty()) {
        std::filesystem::path f = c.llm.fixture_path;
        if (f.is_relative() && !base_dir.empty()) c.llm.fixture_path = (base_dir / f).string();
      }
    }
    if (j.contains("embedder")) c.embedder = EmbedderConfig::from_json(j["embedder"]);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.request_timeout_ms = j.value("request_timeout_ms", c.request_timeout_ms);
    c.bearer_token = j.value("bearer_token", c.bearer_token);
    c.fail_on_retrieval_error = j.value("fail_on_retrieval_error", c.fail_on_retrieval_error);
    c.relax_filters = j.value("relax_filters", c.relax_filters);
    c.record_timings = j.value("record_timings", c.record_timings);

    if (c.k < 1 || c.k > kMaxExemplars) {
      throw ConfigError("k must be between 1 and " + std::to_string(kMaxExemplars));
    }
    if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range");
    if (c.max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
    if (c.request_timeout_ms <= 0) throw ConfigError("request_timeout_ms must be positive");
    if (c.taxonomy_path.empty()) throw ConfigError("config needs taxonomy_path");
    if (c.prompts_path.empty()) throw ConfigError("config needs prompts_path");
    if (c.default_mode == Mode::kEnhanced && c.index_path.empty()) {
      throw ConfigError("enhanced default mode needs index_path");
    }
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed service config: ") + e.what());
  }
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return from_json(doc, path.parent_path());
}

void ServiceConfig::apply_env() {
  if (llm.api_key.empty()) llm.api_key = env_or_empty("RAEC_LLM_API_KEY");
  if (embedder && embedder->api_key.empty()) embedder->api_key = env_or_empty("RAEC_EMBEDDER_API_KEY");
  if (bearer_token.empty()) bearer_token = env_or_empty("RAEC_BEARER_TOKEN");
}

// ---------------------------------------------------------------------------

GuardrailService::GuardrailService(Parts parts, const ServiceConfig& config)
    : parts_(std::move(parts)), config_(config) {
  if (!parts_.backend) throw ConfigError("service needs an LLM backend");
  if (parts_.index && !parts_.embedder) throw ConfigError("an index needs an embedder");
  if (parts_.index && parts_.embedder->dim() != parts_.index->dim()) {
    throw ConfigError("embedder dim " + std::to_string(parts_.embedder->dim()) +
                      " does not match index dim " + std::to_string(parts_.index->dim()));
  }
  limited_ = std::make_unique<LimitedBackend>(*parts_.backend, config_.max_in_flight);
  if (parts_.index) {
    retriever_ = std::make_unique<Retriever>(*parts_.index, *parts_.embedder,
                                             RetrieverOptions{config_.relax_filters});
  }
  JudgeConfig jc;
  jc.k = config_.k;
  jc.fail_on_retrieval_error = config_.fail_on_retrieval_error;
  jc.record_timings = config_.record_timings;
  guardrail_ = std::make_unique<Guardrail>(parts_.taxonomy, parts_.templates, *limited_,
                                           retriever_.get(), jc);
}

std::unique_ptr<GuardrailService> GuardrailService::from_config(const ServiceConfig& config) {
  Parts parts{Taxonomy::load(config.taxonomy_path), PromptTemplates::load(config.prompts_path),
              nullptr, std::nullopt, nullptr};
  auto llm = config.llm;
  llm.timeout_ms = std::min(llm.timeout_ms, config.request_timeout_ms);
  parts.backend = make_backend(llm);
  if (!config.index_path.empty()) {
    parts.index.emplace(Index::load(config.index_path));
    auto ec = config.embedder ? *config.embedder
                              : EmbedderConfig::from_json(parts.index->embedder_description());
    if (ec.api_key.empty()) ec.api_key = env_or_empty("RAEC_EMBEDDER_API_KEY");
    ec.timeout_ms = std::min(ec.timeout_ms, config.request_timeout_ms);
    parts.embedder = make_embedder(ec);
  }
  return std::make_unique<GuardrailService>(std::move(parts), config);
}

bool GuardrailService::authorized(const std::string& header) const {
  if (config_.bearer_token.empty()) return true;
  return header == "Bearer " + config_.bearer_token;
}

HttpReply error_reply(const std::exception& e) {
  if (auto* s = dynamic_cast<const SchemaError*>(&e)) {
    return {400, error_body("schema_violation", s->what(), s->field())};
  }
  if (dynamic_cast<const CodeValidationError*>(&e)) return {422, error_body("unknown_codes", e.what())};
  if (dynamic_cast<const StructuredOutputError*>(&e)) {
    return {422, error_body("unparseable_output", e.what())};
  }
  if (auto* b = dynamic_cast<const BackendError*>(&e)) {
    if (b->kind() == BackendError::Kind::kTimeout) return {504, error_body("backend_timeout", e.what())};
    return {503, error_body("backend_unavailable", e.what())};
  }
  if (dynamic_cast<const RetrievalError*>(&e) || dynamic_cast<const EmbeddingError*>(&e)) {
    return {503, error_body("retrieval_unavailable", e.what())};
  }
  if (dynamic_cast<const ValidationError*>(&e)) return {400, error_body("invalid_request", e.what())};
  return {500, error_body("internal", e.what())};
}

HttpReply GuardrailService::check(const std::string& body) const {
  std::string mode = "?";
  std::string digest = "-";
  HttpReply reply;
  try {
    auto doc = Json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("request body is not valid JSON", "");
    auto input = GuardrailInput::from_json(doc, config_.default_mode);
    mode = std::string(to_string(input.mode));
    digest = short_digest(input.patient_message) + "/" + short_digest(input.llm_draft);
    if (input.mode == Mode::kEnhanced && !retriever_ && input.retrieved_context.empty()) {
      throw SchemaError("enhanced mode is not available: no index configured", "mode");
    }
    reply.body = guardrail_->check(std::move(input)).to_json();
  } catch (const std::exception& e) {
    reply = error_reply(e);
  }
  if (log_) {
    log_("check status=" + std::to_string(reply.status) + " mode=" + mode + " text=" + digest);
  }
  return reply;
}

HttpReply GuardrailService::retrieve(const std::string& body) const {
  HttpReply reply;
  try {
    if (!retriever_) throw SchemaError("retrieval is not available: no index configured", "");
    auto doc = Json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("request body is not valid JSON", "");
    const auto query = RetrievalQuery::from_json(doc);
    reply.body = Json::array();
    for (const auto& p : retriever_->retrieve(query)) reply.body.push_back(p.to_json());
  } catch (const std::exception& e) {
    reply = error_reply(e);
  }
  if (log_) log_("retrieve status=" + std::to_string(reply.status));
  return reply;
}

HttpReply GuardrailService::taxonomy() const { return {200, parts_.taxonomy.to_json()}; }

HttpReply GuardrailService::health() const {
  Json j = Json::object();
  j["status"] = "ok";
  j["taxonomy_version"] = parts_.taxonomy.version();
  j["prompt_template_version"] = parts_.templates.version;
  j["model_id"] = parts_.backend->model_id();
  j["enhanced_available"] = static_cast<bool>(retriever_);
  if (parts_.index) j["index_rows"] = parts_.index->size();
  return {200, j};
}

// ---------------------------------------------------------------------------

struct ServiceServer::Impl {
  const GuardrailService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const GuardrailService& s) : service(s) {}
};

ServiceServer::ServiceServer(const GuardrailService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& srv = impl_->server;
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto guarded = [&svc, send](auto handler) {
    return [&svc, send, handler](const httplib::Request& req, httplib::Response& res) {
      if (!svc.authorized(req.get_header_value("Authorization"))) {
        send(res, {401, error_body("unauthorized", "missing or wrong bearer token")});
        return;
      }
      send(res, handler(req));
    };
  };
  srv.Post("/v1/check", guarded([&svc](const httplib::Request& req) { return svc.check(req.body); }));
  srv.Post("/v1/retrieve",
           guarded([&svc](const httplib::Request& req) { return svc.retrieve(req.body); }));
  srv.Get("/v1/taxonomy", guarded([&svc](const httplib::Request&) { return svc.taxonomy(); }));
  srv.Get("/healthz", [&svc, send](const httplib::Request&, httplib::Response& res) {
    send(res, svc.health());
  });
}

ServiceServer::~ServiceServer() { stop(); }

int ServiceServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  return bound;
}

void ServiceServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void ServiceServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace raec
