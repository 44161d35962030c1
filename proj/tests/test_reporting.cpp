#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "raec/error.hpp"
#include "raec/reporting.hpp"

using namespace raec;

namespace {

GuardrailVerdict verdict(const std::string& id, std::vector<std::pair<std::string, double>> codes) {
  GuardrailVerdict v;
  v.message_id = id;
  v.stage1.has_error = !codes.empty();
  if (v.stage1.has_error) v.stage1.summary = "s";
  for (auto& [c, conf] : codes) v.assignments.push_back({c, conf, ""});
  return v;
}

MessageTriplet triplet(const std::string& id, std::optional<bool> used) {
  MessageTriplet t;
  t.message_id = id;
  t.draft_utilized = used;
  return t;
}

// Builds `messages` verdicts carrying `errors` assignments spread over c1..c5.
void add_group(std::vector<GuardrailVerdict>& vs, std::vector<MessageTriplet>& ts, const std::string& prefix,
               size_t messages, size_t errors, bool used) {
  static const char* codes[] = {"c1", "c2", "c3", "c4", "c5"};
  for (size_t i = 0; i < messages; ++i) {
    std::vector<std::pair<std::string, double>> mine;
    // message i takes errors i, i+messages, ... so each message has distinct codes
    for (size_t e = i; e < errors; e += messages) mine.emplace_back(codes[(e / messages) % 5], 0.9);
    vs.push_back(verdict(prefix + std::to_string(i), mine));
    ts.push_back(triplet(prefix + std::to_string(i), used));
  }
}

}  // namespace

TEST(Summary, CountsCasesAndDomains) {
  const auto t = testutil::toy_taxonomy();
  std::vector<GuardrailVerdict> vs{verdict("a", {{"c1", 0.9}, {"c4", 0.8}}), verdict("b", {})};
  auto s = summarize(vs, t);
  EXPECT_EQ(s.total_messages, 2u);
  EXPECT_EQ(s.cases_with_error, 1u);
  EXPECT_EQ(s.total_errors, 2u);
  EXPECT_DOUBLE_EQ(s.error_rate, 0.5);
  EXPECT_EQ(s.domain_counts.at("d1"), 1u);
  EXPECT_EQ(s.domain_counts.at("d2"), 1u);
  const auto text = s.to_text(t);
  EXPECT_NE(text.find("Domain One"), std::string::npos);
  EXPECT_EQ(s.to_json()["cases_with_error"], 1);
}

TEST(Summary, MinConfidenceAndZeroDomains) {
  const auto t = testutil::toy_taxonomy();
  std::vector<GuardrailVerdict> vs{verdict("a", {{"c1", 0.3}}), verdict("b", {{"c2", 0.7}, {"c3", 0.6}})};
  auto s = summarize(vs, t, {0.5});
  EXPECT_EQ(s.cases_with_error, 1u);
  EXPECT_EQ(s.total_errors, 2u);
  EXPECT_EQ(s.domain_counts.at("d1"), 1u);  // two codes, one message
  EXPECT_EQ(s.domain_counts.at("d2"), 0u);
}

TEST(SummaryProperty, PermutationInvariant) {
  const auto t = testutil::toy_taxonomy();
  std::mt19937_64 rng(17);
  std::vector<GuardrailVerdict> vs;
  for (size_t i = 0; i < 40; ++i) {
    std::vector<std::pair<std::string, double>> cs;
    for (const auto& c : testutil::random_codes(t, rng, 0.2)) cs.emplace_back(c, 0.5);
    vs.push_back(verdict(testutil::mid(i), cs));
  }
  const auto ref = summarize(vs, t).to_json().dump();
  const auto freq = relative_frequencies(vs);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(vs.begin(), vs.end(), rng);
    EXPECT_EQ(summarize(vs, t).to_json().dump(), ref);
    auto f = relative_frequencies(vs);
    ASSERT_EQ(f.size(), freq.size());
    for (size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f[i].code_id, freq[i].code_id);
  }
}

TEST(Frequencies, SharesSumToOneAndSort) {
  std::vector<GuardrailVerdict> vs{verdict("a", {{"c2", 1}, {"c1", 1}}), verdict("b", {{"c2", 1}}),
                                   verdict("c", {{"c3", 1}})};
  auto f = relative_frequencies(vs);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].code_id, "c2");
  EXPECT_EQ(f[0].count, 2u);
  EXPECT_EQ(f[1].code_id, "c1");  // tie on count broken by id
  double sum = 0;
  for (const auto& s : f) sum += s.share;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(top_k(f, 2).size(), 2u);
  EXPECT_EQ(top_k(f, 10).size(), 3u);
  std::vector<GuardrailVerdict> clean{verdict("a", {})};
  EXPECT_THROW(relative_frequencies(clean), StatsError);
}

TEST(FrequenciesProperty, SharesSumToOne) {
  std::mt19937_64 rng(4);
  const auto t = testutil::toy_taxonomy();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GuardrailVerdict> vs;
    for (size_t i = 0; i < 1 + rng() % 30; ++i) {
      std::vector<std::pair<std::string, double>> cs;
      for (const auto& c : testutil::random_codes(t, rng, 0.3)) cs.emplace_back(c, 0.5);
      vs.push_back(verdict(testutil::mid(i), cs));
    }
    vs.push_back(verdict("force", {{"c1", 0.5}}));
    double sum = 0;
    for (const auto& s : relative_frequencies(vs)) sum += s.share;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Utilization, ReproducesReferenceRates) {
  std::vector<GuardrailVerdict> vs;
  std::vector<MessageTriplet> ts;
  add_group(vs, ts, "u", 132, 36, true);
  add_group(vs, ts, "d", 1438, 989, false);
  auto r = stratify_by_utilization(vs, ts);
  EXPECT_EQ(r.utilized.messages, 132u);
  EXPECT_EQ(r.utilized.errors, 36u);
  EXPECT_EQ(r.discarded.errors, 989u);
  EXPECT_NEAR(r.utilized.errors_per_draft, 0.273, 0.0005);
  EXPECT_NEAR(r.discarded.errors_per_draft, 0.688, 0.0005);
  EXPECT_NEAR(r.utilized.errors_per_draft, 0.27, 0.005);
  EXPECT_NEAR(r.discarded.errors_per_draft, 0.69, 0.005);
  for (const auto& d : r.deltas) EXPECT_NEAR(d.delta_pp, d.freq_utilized - d.freq_discarded, 1e-9);
}

TEST(Utilization, DeltaExampleAndAntisymmetry) {
  auto d = frequency_deltas({{"a", 20.0}, {"b", 1.5}}, {{"a", 28.0}, {"c", 3.0}});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].code_id, "a");
  EXPECT_NEAR(d[0].delta_pp, -8.0, 1e-12);
  EXPECT_EQ(d[1].code_id, "c");
  EXPECT_NEAR(d[1].delta_pp, -3.0, 1e-12);
  EXPECT_NEAR(d[2].delta_pp, 1.5, 1e-12);
  auto swapped = frequency_deltas({{"a", 28.0}, {"c", 3.0}}, {{"a", 20.0}, {"b", 1.5}});
  for (const auto& x : d) {
    auto it = std::find_if(swapped.begin(), swapped.end(), [&](const auto& y) { return y.code_id == x.code_id; });
    ASSERT_NE(it, swapped.end());
    EXPECT_NEAR(it->delta_pp, -x.delta_pp, 1e-12);
  }
}

TEST(Utilization, MissingFlagAndEmptyGroup) {
  std::vector<GuardrailVerdict> vs{verdict("a", {}), verdict("b", {}), verdict("c", {})};
  std::vector<MessageTriplet> ts{triplet("a", true), triplet("b", std::nullopt)};
  try {
    stratify_by_utilization(vs, ts);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b"), std::string::npos);
    EXPECT_NE(msg.find("c"), std::string::npos);
  }
  std::vector<MessageTriplet> all_used{triplet("a", true), triplet("b", true), triplet("c", true)};
  EXPECT_THROW(stratify_by_utilization(vs, all_used), StatsError);
  EXPECT_THROW(errors_per_draft(1, 0), StatsError);
}

TEST(Utilization, PerInstanceDenominator) {
  std::vector<GuardrailVerdict> vs{verdict("u", {{"c1", 1}, {"c2", 1}}), verdict("d1", {{"c1", 1}}),
                                   verdict("d2", {})};
  std::vector<MessageTriplet> ts{triplet("u", true), triplet("d1", false), triplet("d2", false)};
  auto msg = stratify_by_utilization(vs, ts);
  EXPECT_DOUBLE_EQ(msg.utilized.frequency_pct.at("c1"), 100.0);
  EXPECT_DOUBLE_EQ(msg.discarded.frequency_pct.at("c1"), 50.0);
  auto inst = stratify_by_utilization(vs, ts, FrequencyDenominator::kPerInstance);
  EXPECT_DOUBLE_EQ(inst.utilized.frequency_pct.at("c1"), 50.0);
  EXPECT_DOUBLE_EQ(inst.discarded.frequency_pct.at("c1"), 100.0);
  EXPECT_FALSE(inst.to_text().empty());
  EXPECT_EQ(inst.to_json()["denominator"], "per-instance");
}

TEST(Tables, FormatAndMetrics) {
  EXPECT_EQ(format_number(std::nullopt), "n/a");
  EXPECT_EQ(format_number(0.12345), "0.123");
  EXPECT_EQ(format_number(2.0, 1), "2.0");
  const auto table = format_table({"label", "n"}, {{"a", "1"}, {"long-label", "100"}});
  EXPECT_NE(table.find("long-label  100"), std::string::npos);
  EXPECT_NE(table.find("---"), std::string::npos);

  std::vector<ConfusionCounts> rows{{"x", 1, 0, 1, 2}, {"y", 0, 0, 0, 4}};
  const auto text = metrics_table(rows);
  EXPECT_NE(text.find("micro"), std::string::npos);
  EXPECT_NE(text.find("macro"), std::string::npos);
  EXPECT_NE(text.find("n/a"), std::string::npos);
  auto j = metrics_json(rows, Level::kDomain, "full");
  EXPECT_EQ(j["level"], "domain");
  EXPECT_EQ(j["universe"], "full");
  EXPECT_EQ(j["micro"]["tp"], 1);
  EXPECT_TRUE(j["labels"][1]["metrics"]["sensitivity"].is_null());
}
