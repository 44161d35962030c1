#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "raec/io.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

/// Versioned prompt templates, loaded from a JSON file. Placeholders use
/// `{{name}}`; rendering fails on any placeholder without a value.
struct PromptTemplates {
  std::string version;
  std::string stage1_system;
  std::string stage1_user;
  std::string stage2_system;
  std::string stage2_user;
  std::string exemplar_header;
  std::string exemplar_item;
  std::string exemplar_none;
  std::string reformat_retry;
  std::string unknown_codes_retry;
  std::string induction_system;
  std::string induction_user;
  /// SHA-256 of the canonical JSON the templates were loaded from.
  std::string digest;

  static PromptTemplates from_json(const Json& doc);
  static PromptTemplates load(const std::filesystem::path& path);
};

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// One line per domain: name and definition.
std::string domain_overview(const Taxonomy& t);
/// Indented domain / subdomain / code listing with ids, names and definitions.
std::string taxonomy_definitions(const Taxonomy& t);

}  // namespace raec
