// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "raec/cli.hpp"
#include "raec/corpus.hpp"
#include "raec/error.hpp"
#include "raec/evalstats.hpp"
#include "raec/judge.hpp"
#include "raec/reporting.hpp"
#include "raec/retrieval.hpp"
#include "retrieval_fixtures.hpp"

using namespace raec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  std::vector<std::string> failures;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++failed;
  }
  size_t failed = 0;
};

std::string fmt(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

fs::path data(const std::string& rel) { return testutil::data_dir() / rel; }

const Taxonomy& seed() {
  static const Taxonomy t = Taxonomy::load(data("seed_taxonomy.json"));
  return t;
}

const PromptTemplates& templates() {
  static const PromptTemplates p = PromptTemplates::load(data("prompts/guardrail_v1.json"));
  return p;
}

const std::vector<MessageTriplet>& synthetic() {
  static const std::vector<MessageTriplet> ts = [] {
    std::ifstream in(data("synthetic/raw_export.jsonl"));
    return dedupe(ingest(in).triplets).triplets;
  }();
  return ts;
}

JudgeConfig quiet() {
  JudgeConfig c;
  c.record_timings = false;
  return c;
}

// 1. reference confusion counts reproduce their expected metrics
void metrics_reproduction(Outcome& o) {
  struct Col {
    const char* name;
    ConfusionCounts counts;
    double v[6];
  };
  const Col cols[] = {
      {"domain/baseline", {"", 42, 48, 31, 379}, {0.575, 0.888, 0.467, 0.924, 0.842, 0.515}},
      {"domain/enhanced", {"", 47, 32, 26, 395}, {0.644, 0.925, 0.595, 0.938, 0.884, 0.618}},
      {"subdomain/baseline", {"", 36, 86, 58, 1420}, {0.383, 0.943, 0.295, 0.961, 0.910, 0.333}},
      {"subdomain/enhanced", {"", 55, 58, 39, 1448}, {0.585, 0.961, 0.487, 0.974, 0.939, 0.531}},
      {"code/baseline", {"", 30, 102, 72, 3496}, {0.294, 0.972, 0.227, 0.980, 0.953, 0.256}},
      {"code/enhanced", {"", 59, 75, 43, 3423}, {0.578, 0.979, 0.440, 0.988, 0.967, 0.500}},
  };
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  for (const auto& c : cols) {
    const auto m = metrics(c.counts);
    const std::optional<double> got[6] = {m.sensitivity, m.specificity, m.ppv, m.npv, m.accuracy, m.f1};
    for (int i = 0; i < 6; ++i) {
      o.require(got[i].has_value(), std::string(c.name) + " metric undefined");
      if (!got[i]) continue;
      const double err = std::fabs(*got[i] - c.v[i]);
      worst = std::max(worst, err);
      o.require(err <= 0.001, std::string(c.name) + " metric " + std::to_string(i) + " = " + fmt(*got[i], 4));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(secs < 1.0, "took " + fmt(secs, 3) + " s");
  o.detail = "36 values, max abs error " + fmt(worst, 5);
}

// 2. every (message, label) cell lands in exactly one confusion cell
void grid_conservation(Outcome& o) {
  std::mt19937_64 rng(2);
  const auto t = testutil::toy_taxonomy();
  const auto u = label_universe(Level::kCode, t);
  for (int trial = 0; trial < 1000; ++trial) {
    AnnotationSet a{"a", {}}, b{"b", {}};
    for (size_t i = 0; i < 100; ++i) {
      a.labels[testutil::mid(i)] = testutil::random_codes(t, rng, 0.3);
      b.labels[testutil::mid(i)] = testutil::random_codes(t, rng, 0.3);
    }
    const auto rows = confusion(a, b, Level::kCode, u, t);
    o.require(rows.size() == 5, "universe size " + std::to_string(rows.size()));
    for (const auto& r : rows) o.require(r.total() == 100, "row total " + std::to_string(r.total()));
    o.require(micro_aggregate(rows).total() == 500, "grid total " + std::to_string(micro_aggregate(rows).total()));
  }
  o.detail = "1000 fixtures x 100 messages x 5 labels";
}

// 3. errors-per-draft rates for utilized and discarded drafts
void utilization_rates(Outcome& o) {
  std::vector<GuardrailVerdict> vs;
  std::vector<MessageTriplet> ts;
  auto add = [&](const std::string& prefix, size_t messages, size_t errors, bool used) {
    static const char* codes[] = {"c1", "c2", "c3", "c4", "c5"};
    for (size_t i = 0; i < messages; ++i) {
      GuardrailVerdict v;
      v.message_id = prefix + std::to_string(i);
      for (size_t e = i; e < errors; e += messages) v.assignments.push_back({codes[(e / messages) % 5], 0.9, ""});
      v.stage1.has_error = !v.assignments.empty();
      vs.push_back(v);
      MessageTriplet t;
      t.message_id = v.message_id;
      t.draft_utilized = used;
      ts.push_back(t);
    }
  };
  add("u", 132, 36, true);
  add("d", 1438, 989, false);
  const auto r = stratify_by_utilization(vs, ts);
  const double u = r.utilized.errors_per_draft, d = r.discarded.errors_per_draft;
  o.require(std::fabs(u - 0.273) < 0.0005, "utilized rate " + fmt(u, 4));
  o.require(std::fabs(d - 0.688) < 0.0005, "discarded rate " + fmt(d, 4));
  o.require(std::fabs(u - 0.27) <= 0.005, "utilized vs 0.27");
  o.require(std::fabs(d - 0.69) <= 0.005, "discarded vs 0.69");
  o.detail = "utilized " + fmt(u, 3) + ", discarded " + fmt(d, 3);
}

// 4. McNemar exact p against a binomial oracle, and the continuity-corrected example
void mcnemar_checks(Outcome& o) {
  double worst = 0;
  for (size_t n = 0; n <= 25; ++n) {
    for (size_t b = 0; b <= n; ++b) {
      const double got = mcnemar_from_counts(b, n - b, McNemarMethod::kExact).p_value;
      const double want = oracle::mcnemar_exact_p(b, n - b);
      worst = std::max(worst, std::fabs(got - want));
      o.require(std::fabs(got - want) <= 1e-12, "exact (" + std::to_string(b) + "," + std::to_string(n - b) + ")");
    }
  }
  const auto cc = mcnemar_from_counts(6, 17, McNemarMethod::kChiSquareCC);
  o.require(std::fabs(cc.statistic - 4.348) <= 0.001, "statistic " + fmt(cc.statistic, 4));
  o.require(std::fabs(cc.p_value - 0.0371) <= 0.0005, "p " + fmt(cc.p_value, 5));
  o.detail = "351 exact cases, max diff " + fmt(worst, 15) + "; (6,17) statistic " + fmt(cc.statistic, 3) +
             " p " + fmt(cc.p_value, 4);
}

// 5. Kendall tau-b against the brute-force oracle
void kendall_checks(Outcome& o) {
  std::vector<double> ref{1, 2, 3, 4, 5}, p = ref;
  size_t cases = 0;
  do {
    o.require(kendall_tau(ref, p) == oracle::kendall_tau_b(ref, p), "permutation mismatch");
    ++cases;
  } while (std::next_permutation(p.begin(), p.end()));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng() % 7;
    std::vector<double> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng() % 4);
      b[i] = static_cast<double>(rng() % 4);
    }
    const auto got = kendall_tau(a, b);
    const auto want = oracle::kendall_tau_b(a, b);
    o.require(got == want, "tied list mismatch (n=" + std::to_string(n) + ")");
    ++cases;
  }
  o.detail = std::to_string(cases) + " lists, exact agreement";
}

// 6. filtered top-k equals an exhaustive scan
void retrieval_recall(Outcome& o) {
  std::mt19937_64 rng(6);
  const auto start = std::chrono::steady_clock::now();
  size_t queries = 0, expected = 0, found = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto corpus = testutil::random_corpus(rng, 1 + rng() % 1000, 16);
    for (size_t k : {1u, 5u, 20u}) {
      RetrievalQuery q;
      q.query_vector = corpus.pool[rng() % corpus.pool.size()];
      q.k = k;
      q.filter = testutil::random_filter(rng);
      if (rng() % 4 == 0) q.exclude_thread_id = "t" + std::to_string(rng() % 20);
      const auto got = retrieve(corpus.index, q);
      const auto want = oracle::scan(corpus.index, *q.query_vector, q.filter, k, q.exclude_thread_id);
      ++queries;
      expected += want.size();
      o.require(got.size() == want.size(), "result count");
      for (size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
        if (got[i].message_id == want[i].first) ++found;
        else o.require(false, "rank " + std::to_string(i + 1) + " differs");
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(secs < 30.0, "took " + fmt(secs, 2) + " s");
  const double recall = expected == 0 ? 1.0 : static_cast<double>(found) / expected;
  o.require(recall == 1.0, "recall " + fmt(recall, 4));
  o.detail = std::to_string(queries) + " queries, recall " + fmt(recall, 3) + ", " + fmt(secs, 2) + " s";
}

// 7. stage gating, taxonomy closure and exemplar provenance over the synthetic corpus
void judge_contract(Outcome& o) {
  const auto& ts = synthetic();
  o.require(ts.size() == 500, "corpus size " + std::to_string(ts.size()));
  auto fixture = ScriptedBackend::load(data("synthetic/guardrail_fixture.json"));
  size_t exchanges = 0;
  FunctionBackend counting([&](const Prompt& p) {
    const bool retry = std::any_of(p.parts.begin(), p.parts.end(),
                                   [](const PromptPart& x) { return x.role == "assistant"; });
    if (p.purpose == "stage2" && !retry) ++exchanges;
    return fixture.generate(p);
  });

  // (a) and (b) in baseline mode
  Guardrail base(seed(), templates(), counting, nullptr, quiet());
  size_t positives = 0;
  for (const auto& t : ts) {
    const auto v = base.check(GuardrailInput::from_triplet(t, Mode::kBaseline));
    if (v.stage1.has_error) ++positives;
    for (const auto& a : v.assignments) o.require(seed().has_code(a.code_id), "out-of-taxonomy " + a.code_id);
  }
  o.require(exchanges == positives,
            "stage-2 exchanges " + std::to_string(exchanges) + " != positives " + std::to_string(positives));

  ScriptedBackend adversarial;
  adversarial.set_default("stage1", Json{{"has_error", true}, {"summary", "x"}, {"reasoning", ""}}.dump());
  adversarial.set_default(
      "stage2", Json{{"errors", {{{"code", "invented-code"}, {"confidence", 0.9}, {"justification", ""}}}}}.dump());
  Guardrail adv(seed(), templates(), adversarial, nullptr, quiet());
  bool rejected = false;
  try {
    adv.check(GuardrailInput::from_triplet(ts[0], Mode::kBaseline));
  } catch (const CodeValidationError&) {
    rejected = true;
  }
  o.require(rejected, "invented code accepted");
  o.require(adversarial.call_count("stage2") == 2,
            "adversarial stage-2 calls " + std::to_string(adversarial.call_count("stage2")));

  // (c) enhanced provenance equals an exhaustive scan of the same index
  HashEmbedder emb(64);
  const auto index = Index::build(ts, emb);
  Retriever retriever(index, emb);
  Guardrail enh(seed(), templates(), fixture, &retriever, quiet());
  size_t compared = 0, exemplars = 0;
  for (size_t i = 0; i < ts.size(); i += 5) {
    const auto& t = ts[i];
    const auto v = enh.check(GuardrailInput::from_triplet(t, Mode::kEnhanced));
    MetadataFilter f;
    f.recipient_name = t.recipient_name;
    f.department = t.department;
    f.specialty = t.specialty;
    const auto want =
        oracle::scan(index, emb.embed(t.patient_message), f, kMaxExemplars, std::optional<std::string>(t.thread_id));
    std::vector<std::string> want_ids;
    for (const auto& w : want) want_ids.push_back(w.first);
    o.require(v.provenance.exemplar_ids == want_ids, "provenance differs for " + t.message_id);
    ++compared;
    exemplars += want_ids.size();
  }
  o.detail = std::to_string(positives) + " positives = " + std::to_string(exchanges) +
             " stage-2 exchanges; adversarial rejected after one retry; " + std::to_string(compared) +
             " provenance lists (" + std::to_string(exemplars) + " exemplars) checked";
  o.require(exemplars > 0, "no exemplars retrieved");
}

// 8. code-level agreement implies agreement at coarser levels
void hierarchy_property(Outcome& o) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = testutil::random_taxonomy(rng);
    AnnotationSet a{"a", {}}, b{"b", {}};
    for (size_t i = 0; i < 10; ++i) {
      a.labels[testutil::mid(i)] = testutil::random_codes(t, rng, 0.3);
      b.labels[testutil::mid(i)] = rng() % 2 ? a.labels[testutil::mid(i)] : testutil::random_codes(t, rng, 0.3);
    }
    const auto c = concordance(a, b, Level::kCode, t);
    const auto s = concordance(a, b, Level::kSubdomain, t);
    const auto d = concordance(a, b, Level::kDomain, t);
    for (const auto& [id, ok] : c.per_message) {
      o.require(!ok || (s.per_message.at(id) && d.per_message.at(id)), "counterexample " + id);
    }
    for (const auto& [id, ok] : s.per_message) o.require(!ok || d.per_message.at(id), "subdomain counterexample");
  }
  o.detail = "1000 random taxonomy/annotation pairs";
}

// 9. two clean end-to-end runs produce identical artifacts
std::map<std::string, std::string> pipeline(const fs::path& dir, Outcome& o) {
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  const std::vector<std::vector<std::string>> steps{
      {"ingest", "--input", data("synthetic/raw_export.jsonl").string(), "--output", p("triplets.jsonl"), "--report",
       p("ingest.json")},
      {"index", "build", "--triplets", p("triplets.jsonl"), "--out", p("index"), "--dim", "64"},
      {"check", "--triplets", p("triplets.jsonl"), "--mode", "enhanced", "--index", p("index"), "--taxonomy",
       data("seed_taxonomy.json").string(), "--prompts", data("prompts/guardrail_v1.json").string(), "--fixture",
       data("synthetic/guardrail_fixture.json").string(), "--out", p("verdicts.jsonl"), "--annotations-out",
       p("enhanced.jsonl"), "--no-timings"},
      {"evaluate", "metrics", "--reference", data("synthetic/physician_annotations.jsonl").string(), "--predicted",
       p("enhanced.jsonl"), "--taxonomy", data("seed_taxonomy.json").string(), "--level", "code", "--universe",
       "full", "--out", p("metrics.json")},
      {"evaluate", "concordance", "--reference", data("synthetic/physician_annotations.jsonl").string(),
       "--predicted", p("enhanced.jsonl"), "--taxonomy", data("seed_taxonomy.json").string(), "--out",
       p("concordance.json")},
      {"report", "--verdicts", p("verdicts.jsonl"), "--taxonomy", data("seed_taxonomy.json").string(), "--out",
       p("report.json"), "--text", p("report.txt"), "--triplets", p("triplets.jsonl"), "--by-utilization"},
  };
  for (const auto& args : steps) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    o.require(code == 0, args[0] + " exited " + std::to_string(code) + ": " + err.str());
    if (code != 0) return {};
  }
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_text_file(e.path());
  return files;
}

void end_to_end(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  testutil::TempDir a("accept-a"), b("accept-b");
  const auto fa = pipeline(a.path(), o);
  const auto fb = pipeline(b.path(), o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(!fa.empty() && fa.size() == fb.size(), "artifact sets differ");
  for (const auto& [name, bytes] : fa) {
    const auto it = fb.find(name);
    o.require(it != fb.end() && it->second == bytes, name + " differs between runs");
  }
  o.require(secs < 60.0, "took " + fmt(secs, 1) + " s");
  o.detail = std::to_string(fa.size()) + " artifacts identical, two runs in " + fmt(secs, 1) + " s";
}

// 10. stratified allocations within one of the exact share; balanced samples split 1:1
void sampling_checks(Outcome& o) {
  std::mt19937_64 rng(10);
  static const char* specs[] = {"cardiology", "dermatology", "oncology", "primary care", "neurology", "urology"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<MessageTriplet> pop;
    const size_t strata = 1 + rng() % 6;
    const size_t size = 10 + rng() % 300;
    for (size_t i = 0; i < size; ++i) {
      MessageTriplet t;
      t.message_id = "p" + std::to_string(i);
      t.specialty = specs[rng() % strata];
      pop.push_back(t);
    }
    const size_t n = 1 + rng() % size;
    const auto s = stratified_sample(pop, n, rng());
    o.require(s.sample.size() == n, "sample size");
    std::map<std::string, size_t> drawn;
    for (const auto& t : s.sample) ++drawn[t.specialty];
    for (const auto& [name, popn] : s.manifest.population) {
      const double exact = static_cast<double>(n) * popn / size;
      o.require(std::fabs(static_cast<double>(drawn[name]) - exact) < 1.0, "stratum " + name + " off by >= 1");
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredTriplet> scored;
    const size_t size = 20 + rng() % 200;
    for (size_t i = 0; i < size; ++i) {
      MessageTriplet t;
      t.message_id = "b" + std::to_string(i);
      scored.push_back({t, rng() % 3 == 0});
    }
    const size_t errors = std::count_if(scored.begin(), scored.end(), [](const auto& s) { return s.has_error; });
    const size_t clean = size - errors;
    const size_t n = 2 * (1 + rng() % std::min(errors, clean));
    const auto b = balanced_sample(scored, n, rng());
    o.require(b.error_taken == n / 2 && b.clean_taken == n / 2, "balanced split not 1:1");
    const size_t flagged = std::count_if(b.sample.begin(), b.sample.end(), [](const auto& s) { return s.has_error; });
    o.require(flagged * 2 == b.sample.size(), "balanced sample composition");
  }
  o.detail = "500 stratified trials, 100 balanced trials";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"1 reference metrics reproduce", metrics_reproduction},
      {"2 confusion grid conservation", grid_conservation},
      {"3 draft utilization rates", utilization_rates},
      {"4 McNemar exact and corrected", mcnemar_checks},
      {"5 Kendall tau-b oracle", kendall_checks},
      {"6 filtered retrieval recall", retrieval_recall},
      {"7 judge contract", judge_contract},
      {"8 hierarchy implication", hierarchy_property},
      {"9 end-to-end determinism", end_to_end},
      {"10 sampling allocation", sampling_checks},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.failed == 0;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  (" << fmt(secs, 2) << " s)  " << o.detail << "\n";
    for (const auto& f : o.failures) std::cout << "      " << f << "\n";
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
