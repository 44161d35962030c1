#include "raec/induction.hpp"

#include <cstdio>
#include <map>
#include <set>

#include "raec/error.hpp"
#include "raec/judge.hpp"
#include "raec/text.hpp"

namespace raec {

namespace {

std::string proposal_id_for(size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%03zu", index + 1);
  return buf;
}

std::string string_field(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_string()) throw ValidationError(std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

struct ParsedInduction {
  std::vector<std::string> codes;
  std::vector<CodeProposal> proposals;
};

ParsedInduction parse_induction(std::string_view text, const std::string& message_id) {
  auto doc = extract_json_object(text);
  if (!doc) throw StructuredOutputError("no JSON object found");
  ParsedInduction out;
  const auto& j = *doc;
  if (j.contains("codes") && !j["codes"].is_null()) {
    if (!j["codes"].is_array()) throw StructuredOutputError("'codes' must be an array");
    for (const auto& c : j["codes"]) {
      if (!c.is_string()) throw StructuredOutputError("'codes' must hold strings");
      out.codes.push_back(trim(c.get<std::string>()));
    }
  }
  if (j.contains("proposals") && !j["proposals"].is_null()) {
    if (!j["proposals"].is_array()) throw StructuredOutputError("'proposals' must be an array");
    for (const auto& p : j["proposals"]) {
      if (!p.is_object()) throw StructuredOutputError("each proposal must be an object");
      CodeProposal cp;
      try {
        cp.name = trim(string_field(p, "name"));
        cp.definition = trim(string_field(p, "definition"));
        cp.suggested_parent_subdomain = trim(string_field(p, "parent_subdomain"));
      } catch (const ValidationError& e) {
        throw StructuredOutputError(std::string("proposal: ") + e.what());
      }
      if (cp.name.empty()) throw StructuredOutputError("proposal without a name");
      cp.triggering_message_id = message_id;
      cp.message_ids = {message_id};
      out.proposals.push_back(std::move(cp));
    }
  }
  return out;
}

}  // namespace

Json CodeProposal::to_json() const {
  Json j = Json::object();
  j["proposal_id"] = proposal_id;
  j["name"] = name;
  j["definition"] = definition;
  j["triggering_message_id"] = triggering_message_id;
  j["suggested_parent_subdomain"] = suggested_parent_subdomain;
  j["occurrences"] = occurrences;
  j["message_ids"] = message_ids;
  return j;
}

CodeProposal CodeProposal::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("proposal record must be an object");
  CodeProposal p;
  p.proposal_id = string_field(j, "proposal_id");
  p.name = string_field(j, "name");
  p.definition = string_field(j, "definition");
  p.triggering_message_id = string_field(j, "triggering_message_id");
  p.suggested_parent_subdomain = string_field(j, "suggested_parent_subdomain");
  p.occurrences = j.value("occurrences", size_t{1});
  p.message_ids = j.value("message_ids", std::vector<std::string>{});
  if (p.proposal_id.empty()) throw ValidationError("proposal without proposal_id");
  if (trim(p.name).empty()) throw ValidationError("proposal " + p.proposal_id + " has an empty name");
  if (p.triggering_message_id.empty()) {
    throw ValidationError("proposal " + p.proposal_id + " has no triggering message");
  }
  return p;
}

Json InductionResult::summary_json() const {
  Json j = Json::object();
  j["messages_labeled"] = labels.labels.size();
  j["proposals"] = proposals.size();
  j["failures"] = Json::array();
  for (const auto& f : failures) j["failures"].push_back({{"message_id", f.message_id}, {"reason", f.reason}});
  j["ignored_codes"] = ignored_codes;
  return j;
}

Prompt assemble_induction_prompt(const MessageTriplet& triplet, const Taxonomy& t,
                                 const PromptTemplates& templates) {
  Prompt p;
  p.purpose = "induction";
  p.parts.push_back({"system", render_template(templates.induction_system,
                                               {{"taxonomy_definitions", taxonomy_definitions(t)}})});
  p.parts.push_back({"user", render_template(templates.induction_user,
                                             {{"patient_message", triplet.patient_message},
                                              {"llm_draft", triplet.llm_draft},
                                              {"clinician_reply", triplet.clinician_reply}})});
  return p;
}

InductionResult induct(const std::vector<MessageTriplet>& triplets, const Taxonomy& t,
                       const PromptTemplates& templates, LlmBackend& backend) {
  InductionResult result;
  result.labels.source = "induction";
  std::map<std::string, size_t> by_name;  // normalized name -> index into proposals

  for (const auto& triplet : triplets) {
    ParsedInduction parsed;
    try {
      parsed = parse_induction(backend.generate(assemble_induction_prompt(triplet, t, templates)),
                               triplet.message_id);
    } catch (const Error& e) {
      result.failures.push_back({triplet.message_id, e.what()});
      continue;
    }

    LabelSet codes;
    for (const auto& c : parsed.codes) {
      if (auto id = resolve_code(c, t)) {
        codes.insert(*id);
      } else {
        result.ignored_codes.push_back(triplet.message_id + ": " + c);
      }
    }
    result.labels.labels[triplet.message_id] = std::move(codes);

    for (auto& p : parsed.proposals) {
      const auto key = normalize_key(p.name);
      auto it = by_name.find(key);
      if (it == by_name.end()) {
        p.proposal_id = proposal_id_for(result.proposals.size());
        by_name.emplace(key, result.proposals.size());
        result.proposals.push_back(std::move(p));
        continue;
      }
      auto& existing = result.proposals[it->second];
      ++existing.occurrences;
      if (existing.message_ids.empty() || existing.message_ids.back() != triplet.message_id) {
        existing.message_ids.push_back(triplet.message_id);
      }
    }
  }
  return result;
}

std::string_view to_string(ReviewAction a) {
  switch (a) {
    case ReviewAction::kAccept: return "accept";
    case ReviewAction::kRename: return "rename";
    case ReviewAction::kMerge: return "merge";
    case ReviewAction::kReject: return "reject";
  }
  return "reject";
}

ReviewAction parse_review_action(std::string_view s) {
  const auto k = normalize_key(s);
  if (k == "accept") return ReviewAction::kAccept;
  if (k == "rename") return ReviewAction::kRename;
  if (k == "merge") return ReviewAction::kMerge;
  if (k == "reject") return ReviewAction::kReject;
  throw ValidationError("unknown review action: " + std::string(s));
}

Json ReviewDecision::to_json() const {
  Json j = Json::object();
  j["proposal_id"] = proposal_id;
  j["action"] = std::string(to_string(action));
  if (!new_name.empty()) j["new_name"] = new_name;
  if (!merge_into.empty()) j["merge_into"] = merge_into;
  if (!parent_subdomain.empty()) j["parent_subdomain"] = parent_subdomain;
  if (!note.empty()) j["note"] = note;
  return j;
}

ReviewDecision ReviewDecision::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("review decision must be an object");
  ReviewDecision d;
  d.proposal_id = string_field(j, "proposal_id");
  if (d.proposal_id.empty()) throw ValidationError("review decision without proposal_id");
  if (!j.contains("action") || !j["action"].is_string()) {
    throw ValidationError("review decision " + d.proposal_id + " needs an action");
  }
  d.action = parse_review_action(j["action"].get<std::string>());
  d.new_name = string_field(j, "new_name");
  d.merge_into = string_field(j, "merge_into");
  d.parent_subdomain = string_field(j, "parent_subdomain");
  d.note = string_field(j, "note");
  if (d.action == ReviewAction::kRename && trim(d.new_name).empty()) {
    throw ValidationError("rename of " + d.proposal_id + " needs new_name");
  }
  if (d.action == ReviewAction::kMerge && trim(d.merge_into).empty()) {
    throw ValidationError("merge of " + d.proposal_id + " needs merge_into");
  }
  return d;
}

Taxonomy merge_review(const Taxonomy& t, const std::vector<CodeProposal>& proposals,
                      const std::vector<ReviewDecision>& decisions) {
  std::map<std::string, const CodeProposal*> known;
  for (const auto& p : proposals) {
    if (!known.emplace(p.proposal_id, &p).second) {
      throw ValidationError("duplicate proposal_id: " + p.proposal_id);
    }
  }

  auto codes = t.codes();
  std::set<std::string> decided;
  for (const auto& d : decisions) {
    auto it = known.find(d.proposal_id);
    if (it == known.end()) throw ValidationError("decision references unknown proposal: " + d.proposal_id);
    if (!decided.insert(d.proposal_id).second) {
      throw ValidationError("more than one decision for proposal: " + d.proposal_id);
    }
    const auto& p = *it->second;
    switch (d.action) {
      case ReviewAction::kReject:
        break;
      case ReviewAction::kMerge:
        if (!t.has_code(d.merge_into)) {
          throw ValidationError("merge of " + d.proposal_id + " into unknown code: " + d.merge_into);
        }
        break;
      case ReviewAction::kAccept:
      case ReviewAction::kRename: {
        const auto parent =
            trim(d.parent_subdomain.empty() ? p.suggested_parent_subdomain : d.parent_subdomain);
        if (parent.empty()) {
          throw ValidationError(std::string(to_string(d.action)) + " of " + d.proposal_id +
                                " has no parent subdomain");
        }
        if (t.find_subdomain(parent) == nullptr) {
          throw ValidationError(d.proposal_id + ": unknown parent subdomain: " + parent);
        }
        ErrorCode code;
        code.name = trim(d.action == ReviewAction::kRename ? d.new_name : p.name);
        code.id = slugify(code.name);
        code.definition = trim(p.definition);
        code.subdomain_id = parent;
        codes.push_back(std::move(code));
        break;
      }
    }
  }
  return Taxonomy::build(t.version() + 1, t.domains(), t.subdomains(), std::move(codes), t.notes());
}

std::vector<CodeProposal> load_proposals(const std::filesystem::path& path) {
  std::vector<CodeProposal> out;
  for (const auto& r : read_jsonl(path)) out.push_back(CodeProposal::from_json(r));
  return out;
}

std::vector<ReviewDecision> load_decisions(const std::filesystem::path& path) {
  std::vector<ReviewDecision> out;
  for (const auto& r : read_jsonl(path)) out.push_back(ReviewDecision::from_json(r));
  return out;
}

std::string proposals_to_jsonl(const std::vector<CodeProposal>& proposals) {
  std::vector<Json> records;
  for (const auto& p : proposals) records.push_back(p.to_json());
  return to_jsonl(records);
}

}  // namespace raec
