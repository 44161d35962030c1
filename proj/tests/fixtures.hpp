#pragma once

#include <random>
#include <string>
#include <vector>

#include "raec/annotation.hpp"
#include "raec/taxonomy.hpp"

namespace testutil {

/// d1 > {s1 > {c1, c2}, s2 > {c3}}, d2 > {s3 > {c4, c5}}
inline raec::Taxonomy toy_taxonomy(std::uint64_t version = 1) {
  using namespace raec;
  return Taxonomy::build(
      version, {{"d1", "Domain One", "first"}, {"d2", "Domain Two", "second"}},
      {{"s1", "Sub One", "", "d1"}, {"s2", "Sub Two", "", "d1"}, {"s3", "Sub Three", "", "d2"}},
      {{"c1", "Code One", "def one", "s1", {}},
       {"c2", "Code Two", "def two", "s1", {}},
       {"c3", "Code Three", "def three", "s2", {}},
       {"c4", "Code Four", "def four", "s3", {}},
       {"c5", "Code Five", "def five", "s3", {}}});
}

/// Random valid 3-level taxonomy: every domain has >= 1 subdomain with >= 1 code.
inline raec::Taxonomy random_taxonomy(std::mt19937_64& rng) {
  using namespace raec;
  std::uniform_int_distribution<int> nd(1, 4), ns(1, 3), nc(1, 4);
  std::vector<Domain> domains;
  std::vector<Subdomain> subs;
  std::vector<ErrorCode> codes;
  const int d = nd(rng);
  for (int i = 0; i < d; ++i) {
    const std::string did = "d" + std::to_string(i);
    domains.push_back({did, "Domain " + did, ""});
    const int s = ns(rng);
    for (int j = 0; j < s; ++j) {
      const std::string sid = did + "-s" + std::to_string(j);
      subs.push_back({sid, "Sub " + sid, "", did});
      const int c = nc(rng);
      for (int k = 0; k < c; ++k) {
        const std::string cid = sid + "-c" + std::to_string(k);
        codes.push_back({cid, "Code " + cid, "definition " + cid, sid, {}});
      }
    }
  }
  return Taxonomy::build(1, domains, subs, codes);
}

/// Random subset of the taxonomy's codes, each kept with probability p.
inline raec::LabelSet random_codes(const raec::Taxonomy& t, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution keep(p);
  raec::LabelSet out;
  for (const auto& c : t.codes()) {
    if (keep(rng)) out.insert(c.id);
  }
  return out;
}

inline std::string mid(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "m%04zu", i);
  return buf;
}

}  // namespace testutil
