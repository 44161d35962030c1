#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raec/annotation.hpp"
#include "raec/corpus.hpp"
#include "raec/io.hpp"
#include "raec/llm_backend.hpp"
#include "raec/prompts.hpp"
#include "raec/retrieval.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

inline constexpr size_t kMaxExemplars = 5;

enum class Mode { kBaseline, kEnhanced };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view s);

/// Chart context shown to the judge. recipient_name, specialty and thread_id
/// are not rendered into the prompt; they drive the retrieval filter.
struct MetadataSnapshot {
  std::string patient_name;
  std::string department;
  std::string last_note;
  std::vector<std::string> thread_history;
  std::string recipient_name;
  std::string specialty;
  std::string thread_id;

  Json to_json() const;
  static MetadataSnapshot from_json(const Json& j);
  /// Fixed-layout text block for prompts.
  std::string render() const;
};

struct GuardrailInput {
  std::string message_id;  // optional, echoed into the verdict
  std::string patient_message;
  std::string llm_draft;
  Mode mode = Mode::kBaseline;
  MetadataSnapshot metadata;
  std::vector<RetrievedPair> retrieved_context;

  /// Throws SchemaError naming the first bad field. `mode` falls back to
  /// `default_mode` when absent.
  static GuardrailInput from_json(const Json& j, Mode default_mode = Mode::kBaseline);
  static GuardrailInput from_triplet(const MessageTriplet& t, Mode mode);
  Json to_json() const;
  /// Baseline carries no context; enhanced carries at most kMaxExemplars, ranks 1..n.
  void validate() const;
};

struct Stage1Finding {
  bool has_error = false;
  std::string summary;
  std::string reasoning;

  Json to_json() const;
  static Stage1Finding from_json(const Json& j);
};

struct ErrorAssignment {
  std::string code_id;
  double confidence = 0.0;
  std::string justification;

  Json to_json() const;
  static ErrorAssignment from_json(const Json& j);
};

struct Timings {
  double retrieval_ms = 0.0;
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
  double total_ms = 0.0;
};

struct Provenance {
  Mode mode = Mode::kBaseline;
  std::string model_id;
  std::uint64_t taxonomy_version = 0;
  std::string prompt_template_version;
  std::string prompt_template_digest;
  std::vector<std::string> exemplar_ids;
  /// Digest of every prompt sent, in call order (retries included).
  std::vector<std::string> prompt_digests;
  size_t stage1_attempts = 0;
  size_t stage2_attempts = 0;
  std::vector<std::string> warnings;
  std::optional<Timings> timings;

  Json to_json() const;
  static Provenance from_json(const Json& j);
};

struct GuardrailVerdict {
  std::string message_id;
  Stage1Finding stage1;
  std::vector<ErrorAssignment> assignments;
  Provenance provenance;

  Json to_json() const;
  static GuardrailVerdict from_json(const Json& j);
  LabelSet codes() const;
};

/// Calls made by one stage, for provenance.
struct StageTrace {
  std::vector<std::string> prompt_digests;
  size_t attempts = 0;
};

Prompt assemble_stage1_prompt(const GuardrailInput& input, const Taxonomy& t,
                              const PromptTemplates& templates);
Prompt assemble_stage2_prompt(const GuardrailInput& input, const Stage1Finding& finding,
                              const Taxonomy& t, const PromptTemplates& templates);

/// Pulls the JSON object out of model text: code fences are stripped and the
/// span from the first '{' to the last '}' is parsed. Empty on failure.
std::optional<Json> extract_json_object(std::string_view text);

/// Parsers for the two structured schemas. They throw StructuredOutputError on
/// schema violations; parse_stage2 leaves code ids unchecked.
Stage1Finding parse_stage1(std::string_view text);
std::vector<ErrorAssignment> parse_stage2(std::string_view text);

/// Resolves a model-emitted code to a taxonomy id: exact id, else its slug.
std::optional<std::string> resolve_code(std::string_view emitted, const Taxonomy& t);

/// One reformat retry on unparseable output, then StructuredOutputError.
Stage1Finding run_stage1(const GuardrailInput& input, const Taxonomy& t,
                         const PromptTemplates& templates, LlmBackend& backend,
                         StageTrace* trace = nullptr);

/// One corrective retry on unparseable output or unknown codes, then
/// StructuredOutputError or CodeValidationError. Repeated codes collapse to the
/// highest confidence; order follows first appearance.
std::vector<ErrorAssignment> run_stage2(const GuardrailInput& input, const Stage1Finding& finding,
                                        const Taxonomy& t, const PromptTemplates& templates,
                                        LlmBackend& backend, StageTrace* trace = nullptr);

struct JudgeConfig {
  size_t k = kMaxExemplars;
  /// Enhanced mode: rethrow retrieval failures instead of running without context.
  bool fail_on_retrieval_error = false;
  /// Wall-clock timings make verdicts non-reproducible; tests switch them off.
  bool record_timings = true;

  static JudgeConfig from_json(const Json& j);
};

/// Two-stage guardrail. Safe to call concurrently when the backend and
/// exemplar source are.
class Guardrail {
 public:
  Guardrail(const Taxonomy& taxonomy, const PromptTemplates& templates, LlmBackend& backend,
            const ExemplarSource* exemplars = nullptr, JudgeConfig config = {});

  /// In enhanced mode with an exemplar source, the context is replaced by
  /// retrieve(k) over the input's metadata filter, excluding its own thread.
  /// Without a source the caller-supplied context is used as is.
  GuardrailVerdict check(GuardrailInput input) const;

  RetrievalQuery exemplar_query(const GuardrailInput& input) const;
  const Taxonomy& taxonomy() const noexcept { return taxonomy_; }
  const JudgeConfig& config() const noexcept { return config_; }

 private:
  const Taxonomy& taxonomy_;
  const PromptTemplates& templates_;
  LlmBackend& backend_;
  const ExemplarSource* exemplars_;
  JudgeConfig config_;
};

/// Verdicts as a code-level annotation source.
AnnotationSet verdicts_to_annotations(const std::vector<GuardrailVerdict>& verdicts,
                                      std::string source, double min_confidence = 0.0);

}  // namespace raec
