#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "raec/annotation.hpp"
#include "raec/corpus.hpp"
#include "raec/io.hpp"
#include "raec/llm_backend.hpp"
#include "raec/prompts.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

/// A new code suggested by the model, pending human review.
struct CodeProposal {
  std::string proposal_id;  // "p001", "p002", ... in first-seen order
  std::string name;
  std::string definition;
  std::string triggering_message_id;
  std::string suggested_parent_subdomain;  // may be empty
  size_t occurrences = 1;
  std::vector<std::string> message_ids;  // every message that proposed it, in order

  Json to_json() const;
  static CodeProposal from_json(const Json& j);
};

struct InductionFailure {
  std::string message_id;
  std::string reason;
};

struct InductionResult {
  AnnotationSet labels;  // source "induction"; failed messages are absent
  std::vector<CodeProposal> proposals;
  std::vector<InductionFailure> failures;
  /// Emitted codes that resolved to nothing in the taxonomy, "message_id: code".
  std::vector<std::string> ignored_codes;

  Json summary_json() const;
};

Prompt assemble_induction_prompt(const MessageTriplet& triplet, const Taxonomy& t,
                                 const PromptTemplates& templates);

/// Labels each triplet with the current taxonomy and collects proposals.
/// Proposals are merged by case-insensitive name; the first occurrence wins.
/// A failing message is recorded and the loop moves on. `t` is never modified.
InductionResult induct(const std::vector<MessageTriplet>& triplets, const Taxonomy& t,
                       const PromptTemplates& templates, LlmBackend& backend);

enum class ReviewAction { kAccept, kRename, kMerge, kReject };

std::string_view to_string(ReviewAction a);
ReviewAction parse_review_action(std::string_view s);

struct ReviewDecision {
  std::string proposal_id;
  ReviewAction action = ReviewAction::kReject;
  std::string new_name;          // rename
  std::string merge_into;        // merge: existing code id
  std::string parent_subdomain;  // accept/rename; overrides the suggestion
  std::string note;

  Json to_json() const;
  static ReviewDecision from_json(const Json& j);
};

/// Returns version+1 with accepted and renamed proposals added as codes
/// (id = slug of the final name). Merges and rejects add nothing. Proposals
/// without a decision are left out.
Taxonomy merge_review(const Taxonomy& t, const std::vector<CodeProposal>& proposals,
                      const std::vector<ReviewDecision>& decisions);

std::vector<CodeProposal> load_proposals(const std::filesystem::path& path);
std::vector<ReviewDecision> load_decisions(const std::filesystem::path& path);
std::string proposals_to_jsonl(const std::vector<CodeProposal>& proposals);

}  // namespace raec
