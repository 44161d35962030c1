#include "raec/judge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

std::string_view to_string(Mode mode) {
  return mode == Mode::kEnhanced ? "enhanced" : "baseline";
}

Mode parse_mode(std::string_view s) {
  const auto k = normalize_key(s);
  if (k == "baseline") return Mode::kBaseline;
  if (k == "enhanced") return Mode::kEnhanced;
  throw ValidationError("unknown mode: " + std::string(s));
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string opt_string(const Json& j, const char* key, const std::string& path) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_string()) throw SchemaError("invalid field type: " + path + key, path + key);
  return j[key].get<std::string>();
}

std::string req_string(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) {
    throw SchemaError(std::string("missing field: ") + key, key);
  }
  if (!j[key].is_string()) throw SchemaError(std::string("invalid field type: ") + key, key);
  auto s = j[key].get<std::string>();
  if (trim(s).empty()) throw SchemaError(std::string("empty field: ") + key, key);
  return s;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string exemplar_block(const GuardrailInput& input, const PromptTemplates& p) {
  if (input.mode == Mode::kBaseline) return {};
  if (input.retrieved_context.empty()) return p.exemplar_none;
  std::string out = p.exemplar_header;
  for (size_t i = 0; i < input.retrieved_context.size(); ++i) {
    const auto& pair = input.retrieved_context[i];
    out += render_template(p.exemplar_item, {{"rank", std::to_string(i + 1)},
                                             {"patient_message", pair.patient_message},
                                             {"response_text", pair.response_text}});
  }
  return out;
}

Prompt with_retry(Prompt p, const std::string& previous, std::string instruction) {
  p.parts.push_back({"assistant", previous});
  p.parts.push_back({"user", std::move(instruction)});
  return p;
}

std::string send(LlmBackend& backend, const Prompt& p, StageTrace& trace) {
  trace.prompt_digests.push_back(p.digest());
  ++trace.attempts;
  return backend.generate(p);
}

}  // namespace

// ---------------------------------------------------------------------------

Json MetadataSnapshot::to_json() const {
  Json j = Json::object();
  j["patient_name"] = patient_name;
  j["department"] = department;
  j["last_note"] = last_note;
  j["thread_history"] = thread_history;
  j["recipient_name"] = recipient_name;
  j["specialty"] = specialty;
  j["thread_id"] = thread_id;
  return j;
}

MetadataSnapshot MetadataSnapshot::from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("invalid field type: metadata", "metadata");
  const std::string path = "metadata.";
  MetadataSnapshot m;
  m.patient_name = opt_string(j, "patient_name", path);
  m.department = opt_string(j, "department", path);
  m.last_note = opt_string(j, "last_note", path);
  m.recipient_name = opt_string(j, "recipient_name", path);
  m.specialty = opt_string(j, "specialty", path);
  m.thread_id = opt_string(j, "thread_id", path);
  if (j.contains("thread_history") && !j["thread_history"].is_null()) {
    const auto& h = j["thread_history"];
    if (h.is_string()) {
      m.thread_history.push_back(h.get<std::string>());
    } else if (h.is_array()) {
      for (const auto& turn : h) {
        if (!turn.is_string()) {
          throw SchemaError("invalid field type: metadata.thread_history", "metadata.thread_history");
        }
        m.thread_history.push_back(turn.get<std::string>());
      }
    } else {
      throw SchemaError("invalid field type: metadata.thread_history", "metadata.thread_history");
    }
  }
  return m;
}

std::string MetadataSnapshot::render() const {
  auto value = [](const std::string& s) { return trim(s).empty() ? std::string("(not provided)") : s; };
  std::string out;
  out += "Patient name: " + value(patient_name) + "\n";
  out += "Department: " + value(department) + "\n";
  out += "Last note: " + value(last_note) + "\n";
  out += "Thread history:";
  if (thread_history.empty()) {
    out += " (not provided)\n";
  } else {
    out += "\n";
    for (const auto& turn : thread_history) out += "- " + turn + "\n";
  }
  return out;
}

GuardrailInput GuardrailInput::from_json(const Json& j, Mode default_mode) {
  if (!j.is_object()) throw SchemaError("request body must be a JSON object", "");
  GuardrailInput in;
  in.message_id = opt_string(j, "message_id", "");
  in.patient_message = req_string(j, "patient_message");
  in.llm_draft = req_string(j, "llm_draft");
  in.mode = default_mode;
  if (j.contains("mode") && !j["mode"].is_null()) {
    if (!j["mode"].is_string()) throw SchemaError("invalid field type: mode", "mode");
    try {
      in.mode = parse_mode(j["mode"].get<std::string>());
    } catch (const ValidationError& e) {
      throw SchemaError(e.what(), "mode");
    }
  }
  if (j.contains("metadata") && !j["metadata"].is_null()) {
    in.metadata = MetadataSnapshot::from_json(j["metadata"]);
  }
  if (j.contains("retrieved_context") && !j["retrieved_context"].is_null()) {
    const auto& ctx = j["retrieved_context"];
    if (!ctx.is_array()) throw SchemaError("invalid field type: retrieved_context", "retrieved_context");
    for (size_t i = 0; i < ctx.size(); ++i) {
      const auto field = "retrieved_context[" + std::to_string(i) + "]";
      try {
        in.retrieved_context.push_back(RetrievedPair::from_json(ctx[i]));
        if (!ctx[i].contains("rank")) in.retrieved_context.back().rank = i + 1;
      } catch (const ValidationError& e) {
        throw SchemaError(field + ": " + e.what(), field);
      }
    }
  }
  in.validate();
  return in;
}

GuardrailInput GuardrailInput::from_triplet(const MessageTriplet& t, Mode mode) {
  GuardrailInput in;
  in.message_id = t.message_id;
  in.patient_message = t.patient_message;
  in.llm_draft = t.llm_draft;
  in.mode = mode;
  in.metadata.department = t.department;
  in.metadata.recipient_name = t.recipient_name;
  in.metadata.specialty = t.specialty;
  in.metadata.thread_id = t.thread_id;
  return in;
}

Json GuardrailInput::to_json() const {
  Json j = Json::object();
  if (!message_id.empty()) j["message_id"] = message_id;
  j["patient_message"] = patient_message;
  j["llm_draft"] = llm_draft;
  j["mode"] = std::string(to_string(mode));
  j["metadata"] = metadata.to_json();
  j["retrieved_context"] = Json::array();
  for (const auto& p : retrieved_context) j["retrieved_context"].push_back(p.to_json());
  return j;
}

void GuardrailInput::validate() const {
  if (trim(patient_message).empty()) throw SchemaError("missing field: patient_message", "patient_message");
  if (trim(llm_draft).empty()) throw SchemaError("missing field: llm_draft", "llm_draft");
  if (mode == Mode::kBaseline && !retrieved_context.empty()) {
    throw SchemaError("baseline mode cannot carry retrieved_context", "retrieved_context");
  }
  if (retrieved_context.size() > kMaxExemplars) {
    throw SchemaError("retrieved_context holds " + std::to_string(retrieved_context.size()) +
                          " exemplars; at most " + std::to_string(kMaxExemplars) + " are allowed",
                      "retrieved_context");
  }
  for (size_t i = 0; i < retrieved_context.size(); ++i) {
    if (retrieved_context[i].rank != i + 1) {
      throw SchemaError("retrieved_context must be in rank order 1..n", "retrieved_context");
    }
  }
}

Json Stage1Finding::to_json() const {
  return Json{{"has_error", has_error}, {"summary", summary}, {"reasoning", reasoning}};
}

Stage1Finding Stage1Finding::from_json(const Json& j) {
  Stage1Finding f;
  f.has_error = j.at("has_error").get<bool>();
  f.summary = j.value("summary", std::string{});
  f.reasoning = j.value("reasoning", std::string{});
  return f;
}

Json ErrorAssignment::to_json() const {
  return Json{{"code_id", code_id}, {"confidence", confidence}, {"justification", justification}};
}

ErrorAssignment ErrorAssignment::from_json(const Json& j) {
  ErrorAssignment a;
  a.code_id = j.at("code_id").get<std::string>();
  a.confidence = j.at("confidence").get<double>();
  a.justification = j.value("justification", std::string{});
  return a;
}

Json Provenance::to_json() const {
  Json j = Json::object();
  j["mode"] = std::string(to_string(mode));
  j["model_id"] = model_id;
  j["taxonomy_version"] = taxonomy_version;
  j["prompt_template_version"] = prompt_template_version;
  j["prompt_template_digest"] = prompt_template_digest;
  j["exemplar_ids"] = exemplar_ids;
  j["prompt_digests"] = prompt_digests;
  j["attempts"] = {{"stage1", stage1_attempts}, {"stage2", stage2_attempts}};
  j["warnings"] = warnings;
  if (timings) {
    j["timings_ms"] = {{"retrieval", timings->retrieval_ms},
                       {"stage1", timings->stage1_ms},
                       {"stage2", timings->stage2_ms},
                       {"total", timings->total_ms}};
  }
  return j;
}

Provenance Provenance::from_json(const Json& j) {
  Provenance p;
  p.mode = parse_mode(j.at("mode").get<std::string>());
  p.model_id = j.value("model_id", std::string{});
  p.taxonomy_version = j.value("taxonomy_version", std::uint64_t{0});
  p.prompt_template_version = j.value("prompt_template_version", std::string{});
  p.prompt_template_digest = j.value("prompt_template_digest", std::string{});
  p.exemplar_ids = j.value("exemplar_ids", std::vector<std::string>{});
  p.prompt_digests = j.value("prompt_digests", std::vector<std::string>{});
  if (j.contains("attempts")) {
    p.stage1_attempts = j["attempts"].value("stage1", size_t{0});
    p.stage2_attempts = j["attempts"].value("stage2", size_t{0});
  }
  p.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("timings_ms")) {
    const auto& t = j["timings_ms"];
    p.timings = Timings{t.value("retrieval", 0.0), t.value("stage1", 0.0), t.value("stage2", 0.0),
                        t.value("total", 0.0)};
  }
  return p;
}

Json GuardrailVerdict::to_json() const {
  Json j = Json::object();
  j["message_id"] = message_id;
  j["stage1"] = stage1.to_json();
  j["assignments"] = Json::array();
  for (const auto& a : assignments) j["assignments"].push_back(a.to_json());
  j["provenance"] = provenance.to_json();
  return j;
}

GuardrailVerdict GuardrailVerdict::from_json(const Json& j) {
  try {
    GuardrailVerdict v;
    v.message_id = j.value("message_id", std::string{});
    v.stage1 = Stage1Finding::from_json(j.at("stage1"));
    for (const auto& a : j.at("assignments")) v.assignments.push_back(ErrorAssignment::from_json(a));
    v.provenance = Provenance::from_json(j.at("provenance"));
    return v;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed verdict record: ") + e.what());
  }
}

LabelSet GuardrailVerdict::codes() const {
  LabelSet out;
  for (const auto& a : assignments) out.insert(a.code_id);
  return out;
}

// ---------------------------------------------------------------------------
// Prompts

Prompt assemble_stage1_prompt(const GuardrailInput& input, const Taxonomy& t,
                              const PromptTemplates& templates) {
  input.validate();
  Prompt p;
  p.purpose = "stage1";
  p.parts.push_back(
      {"system", render_template(templates.stage1_system, {{"domain_overview", domain_overview(t)}})});
  p.parts.push_back({"user", render_template(templates.stage1_user,
                                             {{"patient_message", input.patient_message},
                                              {"llm_draft", input.llm_draft},
                                              {"metadata", input.metadata.render()},
                                              {"exemplars", exemplar_block(input, templates)}})});
  return p;
}

Prompt assemble_stage2_prompt(const GuardrailInput& input, const Stage1Finding& finding,
                              const Taxonomy& t, const PromptTemplates& templates) {
  input.validate();
  Prompt p;
  p.purpose = "stage2";
  p.parts.push_back({"system", render_template(templates.stage2_system,
                                               {{"taxonomy_definitions", taxonomy_definitions(t)}})});
  p.parts.push_back({"user", render_template(templates.stage2_user,
                                             {{"patient_message", input.patient_message},
                                              {"llm_draft", input.llm_draft},
                                              {"metadata", input.metadata.render()},
                                              {"exemplars", exemplar_block(input, templates)},
                                              {"stage1_summary", finding.summary},
                                              {"stage1_reasoning", finding.reasoning}})});
  return p;
}

// ---------------------------------------------------------------------------
// Structured output

std::optional<Json> extract_json_object(std::string_view text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto parsed = Json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

Stage1Finding parse_stage1(std::string_view text) {
  auto doc = extract_json_object(text);
  if (!doc) throw StructuredOutputError("no JSON object found");
  const auto& j = *doc;
  if (!j.contains("has_error") || !j["has_error"].is_boolean()) {
    throw StructuredOutputError("'has_error' must be a boolean");
  }
  for (const char* key : {"summary", "reasoning"}) {
    if (j.contains(key) && !j[key].is_string() && !j[key].is_null()) {
      throw StructuredOutputError(std::string("'") + key + "' must be a string");
    }
  }
  Stage1Finding f;
  f.has_error = j["has_error"].get<bool>();
  if (j.contains("summary") && j["summary"].is_string()) f.summary = j["summary"].get<std::string>();
  if (j.contains("reasoning") && j["reasoning"].is_string()) f.reasoning = j["reasoning"].get<std::string>();
  if (f.has_error && trim(f.summary).empty()) {
    throw StructuredOutputError("'summary' is required when has_error is true");
  }
  return f;
}

std::vector<ErrorAssignment> parse_stage2(std::string_view text) {
  auto doc = extract_json_object(text);
  if (!doc) throw StructuredOutputError("no JSON object found");
  const auto& j = *doc;
  if (!j.contains("errors") || !j["errors"].is_array()) {
    throw StructuredOutputError("'errors' must be an array");
  }
  if (j["errors"].empty()) throw StructuredOutputError("'errors' is empty but an error was detected");
  std::vector<ErrorAssignment> out;
  for (size_t i = 0; i < j["errors"].size(); ++i) {
    const auto& e = j["errors"][i];
    const auto where = "errors[" + std::to_string(i) + "]";
    if (!e.is_object()) throw StructuredOutputError(where + " must be an object");
    if (!e.contains("code") || !e["code"].is_string() || trim(e["code"].get<std::string>()).empty()) {
      throw StructuredOutputError(where + ".code must be a non-empty string");
    }
    if (!e.contains("confidence") || !e["confidence"].is_number()) {
      throw StructuredOutputError(where + ".confidence must be a number");
    }
    const double c = e["confidence"].get<double>();
    if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
      throw StructuredOutputError(where + ".confidence must lie in [0, 1]");
    }
    if (e.contains("justification") && !e["justification"].is_string() &&
        !e["justification"].is_null()) {
      throw StructuredOutputError(where + ".justification must be a string");
    }
    ErrorAssignment a;
    a.code_id = trim(e["code"].get<std::string>());
    a.confidence = c;
    if (e.contains("justification") && e["justification"].is_string()) {
      a.justification = e["justification"].get<std::string>();
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::optional<std::string> resolve_code(std::string_view emitted, const Taxonomy& t) {
  if (t.has_code(emitted)) return std::string(emitted);
  auto slug = slugify(emitted);
  if (!slug.empty() && t.has_code(slug)) return slug;
  return std::nullopt;
}

Stage1Finding run_stage1(const GuardrailInput& input, const Taxonomy& t,
                         const PromptTemplates& templates, LlmBackend& backend, StageTrace* trace) {
  StageTrace local;
  StageTrace& tr = trace ? *trace : local;
  auto prompt = assemble_stage1_prompt(input, t, templates);
  for (int attempt = 0;; ++attempt) {
    const auto text = send(backend, prompt, tr);
    try {
      return parse_stage1(text);
    } catch (const StructuredOutputError& e) {
      if (attempt >= 1) {
        throw StructuredOutputError(std::string("stage 1 output unusable after retry: ") + e.what());
      }
      prompt = with_retry(std::move(prompt), text,
                          render_template(templates.reformat_retry, {{"problem", e.what()}}));
    }
  }
}

std::vector<ErrorAssignment> run_stage2(const GuardrailInput& input, const Stage1Finding& finding,
                                        const Taxonomy& t, const PromptTemplates& templates,
                                        LlmBackend& backend, StageTrace* trace) {
  if (!finding.has_error) throw ValidationError("stage 2 requires a positive stage-1 finding");
  StageTrace local;
  StageTrace& tr = trace ? *trace : local;
  auto prompt = assemble_stage2_prompt(input, finding, t, templates);
  for (int attempt = 0;; ++attempt) {
    const auto text = send(backend, prompt, tr);
    std::vector<ErrorAssignment> parsed;
    try {
      parsed = parse_stage2(text);
    } catch (const StructuredOutputError& e) {
      if (attempt >= 1) {
        throw StructuredOutputError(std::string("stage 2 output unusable after retry: ") + e.what());
      }
      prompt = with_retry(std::move(prompt), text,
                          render_template(templates.reformat_retry, {{"problem", e.what()}}));
      continue;
    }

    std::vector<std::string> unknown;
    for (auto& a : parsed) {
      if (auto id = resolve_code(a.code_id, t)) {
        a.code_id = *id;
      } else if (std::find(unknown.begin(), unknown.end(), a.code_id) == unknown.end()) {
        unknown.push_back(a.code_id);
      }
    }
    if (!unknown.empty()) {
      if (attempt >= 1) {
        throw CodeValidationError("stage 2 named codes outside the taxonomy after retry: " +
                                  join(unknown, ", "));
      }
      prompt = with_retry(std::move(prompt), text,
                          render_template(templates.unknown_codes_retry,
                                          {{"unknown_codes", join(unknown, ", ")},
                                           {"valid_codes", join(t.code_ids(), ", ")}}));
      continue;
    }

    std::vector<ErrorAssignment> out;
    for (auto& a : parsed) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const ErrorAssignment& x) { return x.code_id == a.code_id; });
      if (it == out.end()) {
        out.push_back(std::move(a));
      } else if (a.confidence > it->confidence) {
        *it = std::move(a);
      }
    }
    return out;
  }
}

// ---------------------------------------------------------------------------

JudgeConfig JudgeConfig::from_json(const Json& j) {
  JudgeConfig c;
  c.k = j.value("k", c.k);
  c.fail_on_retrieval_error = j.value("fail_on_retrieval_error", c.fail_on_retrieval_error);
  c.record_timings = j.value("record_timings", c.record_timings);
  if (c.k < 1 || c.k > kMaxExemplars) {
    throw ConfigError("retrieval k must be between 1 and " + std::to_string(kMaxExemplars));
  }
  return c;
}

Guardrail::Guardrail(const Taxonomy& taxonomy, const PromptTemplates& templates,
                     LlmBackend& backend, const ExemplarSource* exemplars, JudgeConfig config)
    : taxonomy_(taxonomy),
      templates_(templates),
      backend_(backend),
      exemplars_(exemplars),
      config_(config) {
  if (config_.k < 1 || config_.k > kMaxExemplars) {
    throw ConfigError("retrieval k must be between 1 and " + std::to_string(kMaxExemplars));
  }
}

RetrievalQuery Guardrail::exemplar_query(const GuardrailInput& input) const {
  RetrievalQuery q;
  q.query_text = input.patient_message;
  q.k = config_.k;
  const auto& m = input.metadata;
  if (!trim(m.recipient_name).empty()) q.filter.recipient_name = m.recipient_name;
  if (!trim(m.department).empty()) q.filter.department = m.department;
  if (!trim(m.specialty).empty()) q.filter.specialty = m.specialty;
  if (!trim(m.thread_id).empty()) q.exclude_thread_id = m.thread_id;
  return q;
}

GuardrailVerdict Guardrail::check(GuardrailInput input) const {
  const auto start = Clock::now();
  Timings timings;
  GuardrailVerdict v;
  v.message_id = input.message_id;
  auto& prov = v.provenance;
  prov.mode = input.mode;
  prov.model_id = backend_.model_id();
  prov.taxonomy_version = taxonomy_.version();
  prov.prompt_template_version = templates_.version;
  prov.prompt_template_digest = templates_.digest;

  if (input.mode == Mode::kEnhanced && exemplars_ != nullptr) {
    const auto t0 = Clock::now();
    try {
      input.retrieved_context = exemplars_->retrieve(exemplar_query(input));
    } catch (const Error& e) {
      if (config_.fail_on_retrieval_error) throw;
      input.retrieved_context.clear();
      prov.warnings.push_back(std::string("retrieval failed, judged without exemplars: ") + e.what());
    }
    if (input.retrieved_context.size() > config_.k) input.retrieved_context.resize(config_.k);
    timings.retrieval_ms = elapsed_ms(t0);
  }
  input.validate();
  for (const auto& p : input.retrieved_context) prov.exemplar_ids.push_back(p.message_id);

  StageTrace s1;
  auto t1 = Clock::now();
  v.stage1 = run_stage1(input, taxonomy_, templates_, backend_, &s1);
  timings.stage1_ms = elapsed_ms(t1);
  prov.stage1_attempts = s1.attempts;
  prov.prompt_digests = s1.prompt_digests;

  if (v.stage1.has_error) {
    StageTrace s2;
    auto t2 = Clock::now();
    v.assignments = run_stage2(input, v.stage1, taxonomy_, templates_, backend_, &s2);
    timings.stage2_ms = elapsed_ms(t2);
    prov.stage2_attempts = s2.attempts;
    prov.prompt_digests.insert(prov.prompt_digests.end(), s2.prompt_digests.begin(),
                               s2.prompt_digests.end());
  }
  timings.total_ms = elapsed_ms(start);
  if (config_.record_timings) prov.timings = timings;
  return v;
}

AnnotationSet verdicts_to_annotations(const std::vector<GuardrailVerdict>& verdicts,
                                      std::string source, double min_confidence) {
  AnnotationSet out;
  out.source = std::move(source);
  for (const auto& v : verdicts) {
    if (v.message_id.empty()) throw ValidationError("verdict without message_id");
    LabelSet codes;
    for (const auto& a : v.assignments) {
      if (a.confidence >= min_confidence) codes.insert(a.code_id);
    }
    if (!out.labels.emplace(v.message_id, std::move(codes)).second) {
      throw ValidationError("duplicate verdict for message_id: " + v.message_id);
    }
  }
  return out;
}

}  // namespace raec
