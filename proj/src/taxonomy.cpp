#include "raec/taxonomy.hpp"

#include <algorithm>

#include "raec/annotation.hpp"
#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

Level parse_level(std::string_view s) {
  const auto key = normalize_key(s);
  if (key == "code" || key == "error-code" || key == "error_code") return Level::kCode;
  if (key == "subdomain") return Level::kSubdomain;
  if (key == "domain") return Level::kDomain;
  throw ValidationError("unknown level: " + std::string(s));
}

std::string_view to_string(Level level) {
  switch (level) {
    case Level::kCode:
      return "code";
    case Level::kSubdomain:
      return "subdomain";
    case Level::kDomain:
      return "domain";
  }
  return "code";
}

namespace {

std::string required_string(const Json& entry, const char* key, const std::string& where) {
  if (!entry.contains(key) || !entry[key].is_string()) {
    throw TaxonomyError(where + ": missing string field '" + key + "'",
                        entry.contains("id") && entry["id"].is_string()
                            ? entry["id"].get<std::string>()
                            : std::string{});
  }
  return entry[key].get<std::string>();
}

std::string optional_string(const Json& entry, const char* key) {
  if (!entry.contains(key) || entry[key].is_null()) return {};
  if (!entry[key].is_string()) {
    throw TaxonomyError(std::string("field '") + key + "' must be a string",
                        entry.value("id", std::string{}));
  }
  return entry[key].get<std::string>();
}

const Json& array_field(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw TaxonomyError(std::string("taxonomy document needs array '") + key + "'", {});
  }
  return doc[key];
}

template <typename Entry>
void check_common(const Entry& e, const char* kind) {
  if (!is_slug(e.id)) {
    throw TaxonomyError(std::string(kind) + " id is not a slug: '" + e.id + "'", e.id);
  }
  if (trim(e.name).empty()) {
    throw TaxonomyError(std::string(kind) + " " + e.id + " has an empty name", e.id);
  }
}

template <typename Entry>
std::map<std::string, size_t, std::less<>> index_ids(const std::vector<Entry>& entries,
                                                     const char* kind) {
  std::map<std::string, size_t, std::less<>> index;
  for (size_t i = 0; i < entries.size(); ++i) {
    check_common(entries[i], kind);
    if (!index.emplace(entries[i].id, i).second) {
      throw TaxonomyError(std::string("duplicate ") + kind + " id: " + entries[i].id,
                          entries[i].id);
    }
  }
  return index;
}

template <typename Entry>
Json entry_json(const Entry& e) {
  Json j;
  j["id"] = e.id;
  j["name"] = e.name;
  if (!e.definition.empty()) j["definition"] = e.definition;
  return j;
}

}  // namespace

void Taxonomy::validate_and_index() {
  domain_index_ = index_ids(domains_, "domain");
  subdomain_index_ = index_ids(subdomains_, "subdomain");
  code_index_ = index_ids(codes_, "code");

  for (const auto& s : subdomains_) {
    if (!domain_index_.contains(s.domain_id)) {
      throw TaxonomyError("dangling parent reference: subdomain " + s.id + " -> domain '" +
                              s.domain_id + "'",
                          s.id);
    }
  }
  std::vector<bool> domain_used(domains_.size(), false);
  for (const auto& c : codes_) {
    if (trim(c.definition).empty()) {
      throw TaxonomyError("code " + c.id + " has an empty definition", c.id);
    }
    auto it = subdomain_index_.find(c.subdomain_id);
    if (it == subdomain_index_.end()) {
      throw TaxonomyError("dangling parent reference: code " + c.id + " -> subdomain '" +
                              c.subdomain_id + "'",
                          c.id);
    }
    domain_used[domain_index_.at(subdomains_[it->second].domain_id)] = true;
  }
  for (size_t i = 0; i < domains_.size(); ++i) {
    if (!domain_used[i]) {
      throw TaxonomyError("domain " + domains_[i].id + " has no error codes", domains_[i].id);
    }
  }
}

Taxonomy Taxonomy::build(std::uint64_t version, std::vector<Domain> domains,
                         std::vector<Subdomain> subdomains, std::vector<ErrorCode> codes,
                         std::string notes) {
  Taxonomy t;
  t.version_ = version;
  t.notes_ = std::move(notes);
  t.domains_ = std::move(domains);
  t.subdomains_ = std::move(subdomains);
  t.codes_ = std::move(codes);
  t.validate_and_index();
  return t;
}

Taxonomy Taxonomy::from_json(const Json& doc) {
  if (!doc.is_object()) throw TaxonomyError("taxonomy document must be an object", {});
  if (!doc.contains("version") || !doc["version"].is_number_unsigned()) {
    throw TaxonomyError("taxonomy document needs a non-negative integer 'version'", {});
  }
  std::vector<Domain> domains;
  for (const auto& e : array_field(doc, "domains")) {
    if (!e.is_object()) throw TaxonomyError("domain entries must be objects", {});
    domains.push_back({required_string(e, "id", "domain"), required_string(e, "name", "domain"),
                       optional_string(e, "definition")});
  }
  std::vector<Subdomain> subdomains;
  for (const auto& e : array_field(doc, "subdomains")) {
    if (!e.is_object()) throw TaxonomyError("subdomain entries must be objects", {});
    subdomains.push_back({required_string(e, "id", "subdomain"),
                          required_string(e, "name", "subdomain"),
                          optional_string(e, "definition"),
                          required_string(e, "parent", "subdomain")});
  }
  std::vector<ErrorCode> codes;
  for (const auto& e : array_field(doc, "codes")) {
    if (!e.is_object()) throw TaxonomyError("code entries must be objects", {});
    ErrorCode c{required_string(e, "id", "code"), required_string(e, "name", "code"),
                optional_string(e, "definition"), required_string(e, "parent", "code"), {}};
    if (e.contains("exemplars")) {
      if (!e["exemplars"].is_array()) {
        throw TaxonomyError("code " + c.id + ": exemplars must be an array", c.id);
      }
      for (const auto& x : e["exemplars"]) {
        if (!x.is_string()) throw TaxonomyError("code " + c.id + ": exemplar not a string", c.id);
        c.exemplars.push_back(x.get<std::string>());
      }
    }
    codes.push_back(std::move(c));
  }
  return build(doc["version"].get<std::uint64_t>(), std::move(domains), std::move(subdomains),
               std::move(codes), optional_string(doc, "notes"));
}

Taxonomy Taxonomy::parse(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw TaxonomyError(std::string("taxonomy document is not valid JSON: ") + e.what(), {});
  }
  return from_json(doc);
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

Json Taxonomy::to_json() const {
  Json doc;
  doc["version"] = version_;
  if (!notes_.empty()) doc["notes"] = notes_;
  doc["domains"] = Json::array();
  for (const auto& d : domains_) doc["domains"].push_back(entry_json(d));
  doc["subdomains"] = Json::array();
  for (const auto& s : subdomains_) {
    auto j = entry_json(s);
    j["parent"] = s.domain_id;
    doc["subdomains"].push_back(std::move(j));
  }
  doc["codes"] = Json::array();
  for (const auto& c : codes_) {
    auto j = entry_json(c);
    j["parent"] = c.subdomain_id;
    if (!c.exemplars.empty()) j["exemplars"] = c.exemplars;
    doc["codes"].push_back(std::move(j));
  }
  return doc;
}

const ErrorCode* Taxonomy::find_code(std::string_view code_id) const {
  auto it = code_index_.find(code_id);
  return it == code_index_.end() ? nullptr : &codes_[it->second];
}

const Subdomain* Taxonomy::find_subdomain(std::string_view subdomain_id) const {
  auto it = subdomain_index_.find(subdomain_id);
  return it == subdomain_index_.end() ? nullptr : &subdomains_[it->second];
}

const Domain* Taxonomy::find_domain(std::string_view domain_id) const {
  auto it = domain_index_.find(domain_id);
  return it == domain_index_.end() ? nullptr : &domains_[it->second];
}

bool Taxonomy::has_label(Level level, std::string_view id) const {
  switch (level) {
    case Level::kCode:
      return code_index_.contains(id);
    case Level::kSubdomain:
      return subdomain_index_.contains(id);
    case Level::kDomain:
      return domain_index_.contains(id);
  }
  return false;
}

const std::string& Taxonomy::ancestor(std::string_view code_id, Level level) const {
  const auto* code = find_code(code_id);
  if (code == nullptr) throw ValidationError("unknown code_id: " + std::string(code_id));
  if (level == Level::kCode) return code->id;
  const auto& sub = subdomains_[subdomain_index_.find(code->subdomain_id)->second];
  if (level == Level::kSubdomain) return sub.id;
  return sub.domain_id;
}

std::vector<std::string> Taxonomy::labels(Level level) const {
  std::vector<std::string> out;
  auto collect = [&out](const auto& index) {
    for (const auto& [id, _] : index) out.push_back(id);
  };
  switch (level) {
    case Level::kCode:
      collect(code_index_);
      break;
    case Level::kSubdomain:
      collect(subdomain_index_);
      break;
    case Level::kDomain:
      collect(domain_index_);
      break;
  }
  return out;
}

LabelSet project(const LabelSet& codes, Level level, const Taxonomy& t) {
  LabelSet out;
  for (const auto& c : codes) out.insert(t.ancestor(c, level));
  return out;
}

std::vector<std::string> label_universe(Level level, const Taxonomy& t) { return t.labels(level); }

std::vector<std::string> label_universe(Level level, std::span<const AnnotationSet> observed,
                                        const Taxonomy& t) {
  LabelSet seen;
  for (const auto& set : observed) {
    for (const auto& [_, codes] : set.labels) {
      for (const auto& c : codes) seen.insert(t.ancestor(c, level));
    }
  }
  return {seen.begin(), seen.end()};
}

}  // namespace raec
