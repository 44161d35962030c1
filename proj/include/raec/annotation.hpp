#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raec/io.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

/// Code-level labels assigned by one source (physician, baseline, enhanced, ...).
struct AnnotationSet {
  std::string source;
  std::map<std::string, LabelSet> labels;  // message_id -> code ids
};

/// Groups `{message_id, source, codes:[...]}` records by source. A message id may
/// appear at most once per source.
std::map<std::string, AnnotationSet> parse_annotations(const std::vector<Json>& records);

/// Loads one source from an annotation file. When `source` is empty the file must
/// contain exactly one source.
AnnotationSet load_annotations(const std::filesystem::path& path, const std::string& source = {});

std::vector<Json> annotations_to_records(const AnnotationSet& set);

/// Throws ValidationError naming the first code missing from `t`.
void validate_annotation_codes(const AnnotationSet& set, const Taxonomy& t);

}  // namespace raec
