#include "raec/annotation.hpp"

#include "raec/error.hpp"

namespace raec {

std::map<std::string, AnnotationSet> parse_annotations(const std::vector<Json>& records) {
  std::map<std::string, AnnotationSet> by_source;
  size_t row = 0;
  for (const auto& r : records) {
    ++row;
    const auto where = "annotation record " + std::to_string(row);
    if (!r.is_object()) throw ValidationError(where + ": not an object");
    if (!r.contains("message_id") || !r["message_id"].is_string()) {
      throw ValidationError(where + ": missing field: message_id");
    }
    if (!r.contains("source") || !r["source"].is_string()) {
      throw ValidationError(where + ": missing field: source");
    }
    if (!r.contains("codes") || !r["codes"].is_array()) {
      throw ValidationError(where + ": missing field: codes");
    }
    const auto source = r["source"].get<std::string>();
    const auto message_id = r["message_id"].get<std::string>();
    auto& set = by_source[source];
    set.source = source;
    LabelSet codes;
    for (const auto& c : r["codes"]) {
      if (!c.is_string()) throw ValidationError(where + ": codes must be strings");
      codes.insert(c.get<std::string>());
    }
    if (!set.labels.emplace(message_id, std::move(codes)).second) {
      throw ValidationError(where + ": duplicate message_id " + message_id + " for source " +
                            source);
    }
  }
  return by_source;
}

AnnotationSet load_annotations(const std::filesystem::path& path, const std::string& source) {
  auto grouped = parse_annotations(read_jsonl(path));
  if (source.empty()) {
    if (grouped.size() != 1) {
      throw ValidationError(path.string() + ": expected exactly one source, found " +
                            std::to_string(grouped.size()));
    }
    return std::move(grouped.begin()->second);
  }
  auto it = grouped.find(source);
  if (it == grouped.end()) {
    throw ValidationError(path.string() + ": no annotations for source " + source);
  }
  return std::move(it->second);
}

std::vector<Json> annotations_to_records(const AnnotationSet& set) {
  std::vector<Json> out;
  out.reserve(set.labels.size());
  for (const auto& [message_id, codes] : set.labels) {
    Json r;
    r["message_id"] = message_id;
    r["source"] = set.source;
    r["codes"] = Json::array();
    for (const auto& c : codes) r["codes"].push_back(c);
    out.push_back(std::move(r));
  }
  return out;
}

void validate_annotation_codes(const AnnotationSet& set, const Taxonomy& t) {
  for (const auto& [message_id, codes] : set.labels) {
    for (const auto& c : codes) {
      if (!t.has_code(c)) {
        throw ValidationError("source " + set.source + ", message " + message_id +
                              ": unknown code " + c);
      }
    }
  }
}

}  // namespace raec
