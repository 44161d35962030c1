#include "raec/prompts.hpp"

#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

namespace {

std::string section(const Json& doc, const char* group, const char* key) {
  if (!doc.contains(group) || !doc[group].is_object() || !doc[group].contains(key) ||
      !doc[group][key].is_string()) {
    throw ConfigError(std::string("prompt templates need string '") + group + "." + key + "'");
  }
  return doc[group][key].get<std::string>();
}

}  // namespace

PromptTemplates PromptTemplates::from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_string()) {
    throw ConfigError("prompt templates need a string 'version'");
  }
  PromptTemplates t;
  t.version = doc["version"].get<std::string>();
  t.stage1_system = section(doc, "stage1", "system");
  t.stage1_user = section(doc, "stage1", "user");
  t.stage2_system = section(doc, "stage2", "system");
  t.stage2_user = section(doc, "stage2", "user");
  t.exemplar_header = section(doc, "exemplars", "header");
  t.exemplar_item = section(doc, "exemplars", "item");
  t.exemplar_none = section(doc, "exemplars", "none");
  t.reformat_retry = section(doc, "retry", "reformat");
  t.unknown_codes_retry = section(doc, "retry", "unknown_codes");
  t.induction_system = section(doc, "induction", "system");
  t.induction_user = section(doc, "induction", "user");
  t.digest = sha256_hex(doc.dump());
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(read_text_file(path)));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed prompt templates: " + e.what());
  }
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in template");
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(trim(tmpl.substr(open + 2, close - open - 2)));
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("template placeholder without a value: " + name);
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

std::string domain_overview(const Taxonomy& t) {
  std::string out;
  for (const auto& d : t.domains()) {
    out += "- " + d.name;
    if (!d.definition.empty()) out += ": " + d.definition;
    out += "\n";
  }
  return out;
}

std::string taxonomy_definitions(const Taxonomy& t) {
  std::string out;
  for (const auto& d : t.domains()) {
    out += "Domain " + d.id + " (" + d.name + ")";
    if (!d.definition.empty()) out += ": " + d.definition;
    out += "\n";
    for (const auto& s : t.subdomains()) {
      if (s.domain_id != d.id) continue;
      out += "  Subdomain " + s.id + " (" + s.name + ")";
      if (!s.definition.empty()) out += ": " + s.definition;
      out += "\n";
      for (const auto& c : t.codes()) {
        if (c.subdomain_id != s.id) continue;
        out += "    Code " + c.id + " (" + c.name + "): " + c.definition + "\n";
      }
    }
  }
  return out;
}

}  // namespace raec
