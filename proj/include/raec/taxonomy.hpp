#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raec/io.hpp"

namespace raec {

struct AnnotationSet;

/// Hierarchy levels, finest to coarsest.
enum class Level { kCode, kSubdomain, kDomain };

Level parse_level(std::string_view s);
std::string_view to_string(Level level);

/// Label ids at one level. std::set keeps them in lexicographic order.
using LabelSet = std::set<std::string>;

struct Domain {
  std::string id;
  std::string name;
  std::string definition;
};

struct Subdomain {
  std::string id;
  std::string name;
  std::string definition;
  std::string domain_id;
};

struct ErrorCode {
  std::string id;
  std::string name;
  std::string definition;
  std::string subdomain_id;
  std::vector<std::string> exemplars;
};

/// Immutable, validated three-level error ontology (domain -> subdomain -> code).
///
/// Instances can only be obtained through `build`/`parse`/`load`, all of which run
/// the full validation pass, so every live Taxonomy satisfies:
///   - ids are slugs and unique within their level,
///   - every subdomain has an existing parent domain and every code an existing
///     parent subdomain,
///   - names are non-empty, code definitions are non-empty,
///   - every domain reaches at least one code.
class Taxonomy {
 public:
  static Taxonomy build(std::uint64_t version, std::vector<Domain> domains,
                        std::vector<Subdomain> subdomains, std::vector<ErrorCode> codes,
                        std::string notes = {});
  static Taxonomy from_json(const Json& doc);
  static Taxonomy parse(std::string_view text);
  static Taxonomy load(const std::filesystem::path& path);

  /// Canonical document: {version, notes?, domains, subdomains, codes}.
  Json to_json() const;

  std::uint64_t version() const noexcept { return version_; }
  const std::string& notes() const noexcept { return notes_; }
  const std::vector<Domain>& domains() const noexcept { return domains_; }
  const std::vector<Subdomain>& subdomains() const noexcept { return subdomains_; }
  const std::vector<ErrorCode>& codes() const noexcept { return codes_; }

  const ErrorCode* find_code(std::string_view code_id) const;
  const Subdomain* find_subdomain(std::string_view subdomain_id) const;
  const Domain* find_domain(std::string_view domain_id) const;

  bool has_code(std::string_view code_id) const { return find_code(code_id) != nullptr; }
  bool has_label(Level level, std::string_view id) const;

  /// Ancestor of `code_id` at `level` (the code itself for Level::kCode).
  /// Throws ValidationError for unknown codes.
  const std::string& ancestor(std::string_view code_id, Level level) const;

  /// Every label id at `level`, lexicographic.
  std::vector<std::string> labels(Level level) const;

  /// Sorted code ids, convenient for corrective prompts.
  std::vector<std::string> code_ids() const { return labels(Level::kCode); }

 private:
  Taxonomy() = default;
  void validate_and_index();

  std::uint64_t version_ = 0;
  std::string notes_;
  std::vector<Domain> domains_;
  std::vector<Subdomain> subdomains_;
  std::vector<ErrorCode> codes_;
  std::map<std::string, size_t, std::less<>> domain_index_;
  std::map<std::string, size_t, std::less<>> subdomain_index_;
  std::map<std::string, size_t, std::less<>> code_index_;
};

/// Maps a set of code ids to the deduplicated set of their ancestors at `level`.
/// Level::kCode returns the input unchanged (after checking every id exists).
LabelSet project(const LabelSet& codes, Level level, const Taxonomy& t);

/// All labels at `level` in the taxonomy, lexicographic.
std::vector<std::string> label_universe(Level level, const Taxonomy& t);

/// Labels appearing in at least one annotation set, projected to `level`, lexicographic.
std::vector<std::string> label_universe(Level level, std::span<const AnnotationSet> observed,
                                        const Taxonomy& t);

}  // namespace raec
