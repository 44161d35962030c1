#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "raec/corpus.hpp"
#include "raec/error.hpp"
#include "raec/retrieval.hpp"
#include "retrieval_fixtures.hpp"

using namespace raec;

namespace {

IndexEntry entry(const std::string& id, std::vector<float> v, const std::string& recipient = "Dr. A",
                 const std::string& dept = "Clinic", const std::string& spec = "cardiology",
                 const std::string& thread = "t0") {
  IndexEntry e;
  e.message_id = id;
  e.thread_id = thread;
  e.recipient_name = recipient;
  e.department = dept;
  e.specialty = spec;
  e.patient_message = "pm " + id;
  e.response_text = "rt " + id;
  e.vector = EmbeddingVector(std::move(v));
  return e;
}

std::vector<std::string> ids(const std::vector<RetrievedPair>& pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) out.push_back(p.message_id);
  return out;
}

RetrievalQuery vector_query(std::vector<float> v, size_t k) {
  RetrievalQuery q;
  q.query_vector = EmbeddingVector(std::move(v));
  q.k = k;
  return q;
}

}  // namespace

TEST(Cosine, KnownValues) {
  EXPECT_NEAR(cosine(std::vector<float>{1, 2, 2}, std::vector<float>{2, 1, 2}), 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0, 1e-12);
  EXPECT_NEAR(cosine(std::vector<float>{1, 1}, std::vector<float>{-2, -2}), -1.0, 1e-12);
  EXPECT_THROW(cosine(std::vector<float>{1, 0}, std::vector<float>{1, 0, 0}), RetrievalError);
  EXPECT_THROW(cosine(std::vector<float>{0, 0}, std::vector<float>{1, 0}), RetrievalError);
}

TEST(Index, RejectsEmptyDuplicateAndMixedDim) {
  EXPECT_THROW(Index::from_entries({}), RetrievalError);
  EXPECT_THROW(Index::from_entries({entry("a", {1, 0}), entry("a", {0, 1})}), RetrievalError);
  EXPECT_THROW(Index::from_entries({entry("a", {1, 0}), entry("b", {0, 1, 0})}), RetrievalError);
}

TEST(Index, BuildSaveLoadRoundTrip) {
  testutil::TempDir dir("index");
  HashEmbedder emb(16);
  std::vector<MessageTriplet> ts;
  for (int i = 0; i < 5; ++i) {
    MessageTriplet t;
    t.message_id = "m" + std::to_string(i);
    t.thread_id = "t" + std::to_string(i);
    t.patient_message = "patient says " + std::to_string(i);
    t.clinician_reply = "clinician says " + std::to_string(i);
    t.specialty = "x";
    ts.push_back(t);
  }
  auto idx = Index::build(ts, emb);
  EXPECT_EQ(idx.size(), 5u);
  EXPECT_EQ(idx.entries()[2].response_text, "clinician says 2");
  EXPECT_EQ(idx.entries()[2].vector, emb.embed("patient says 2"));
  idx.save(dir / "ix");
  EXPECT_TRUE(std::filesystem::exists(dir / "ix.vec"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ix.meta.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ix.manifest.json"));
  auto back = Index::load(dir / "ix");
  EXPECT_EQ(back.size(), 5u);
  EXPECT_EQ(back.dim(), 16u);
  for (size_t i = 0; i < 5; ++i) EXPECT_EQ(back.entries()[i].vector, idx.entries()[i].vector);
  EXPECT_EQ(back.embedder_description().dump(), emb.describe().dump());
  EXPECT_THROW(Index::load(dir / "missing"), Error);
}

TEST(Retrieve, RanksByCosineThenId) {
  auto idx = Index::from_entries({entry("b", {1, 0}), entry("a", {1, 0}), entry("c", {0.6f, 0.8f}),
                                  entry("d", {-1, 0})});
  auto res = retrieve(idx, vector_query({1, 0}, 3));
  EXPECT_EQ(ids(res), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(res[0].rank, 1u);
  EXPECT_EQ(res[2].rank, 3u);
  EXPECT_NEAR(res[2].similarity, 0.6, 1e-6);
  EXPECT_EQ(res[0].response_text, "rt a");
  EXPECT_EQ(retrieve(idx, vector_query({1, 0}, 10)).size(), 4u);
}

TEST(Retrieve, FiltersCaseInsensitiveAndExcludesThread) {
  auto idx = Index::from_entries({entry("a", {1, 0}, "Dr. A", "Clinic", "cardiology", "t1"),
                                  entry("b", {1, 0.1f}, " dr. a", "CLINIC", "Cardiology", "t2"),
                                  entry("c", {1, 0.2f}, "Dr. B", "Clinic", "cardiology", "t3"),
                                  entry("d", {1, 0.3f}, "Dr. A", "Other", "dermatology", "t4")});
  auto q = vector_query({1, 0}, 5);
  q.filter.recipient_name = "DR. A ";
  q.filter.specialty = "cardiology";
  EXPECT_EQ(ids(retrieve(idx, q)), (std::vector<std::string>{"a", "b"}));
  q.exclude_thread_id = "t1";
  EXPECT_EQ(ids(retrieve(idx, q)), (std::vector<std::string>{"b"}));
  q.filter.recipient_name = "nobody";
  EXPECT_TRUE(retrieve(idx, q).empty());
}

TEST(Retrieve, RelaxationLadderIsOptIn) {
  auto idx = Index::from_entries({entry("a", {1, 0}, "Dr. A", "Clinic"),
                                  entry("b", {1, 0.1f}, "Dr. B", "Clinic"),
                                  entry("c", {1, 0.2f}, "Dr. C", "Other")});
  auto q = vector_query({1, 0}, 3);
  q.filter.recipient_name = "Dr. A";
  q.filter.department = "Clinic";
  EXPECT_EQ(retrieve(idx, q).size(), 1u);
  EXPECT_EQ(ids(retrieve(idx, q, nullptr, {true})), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Retrieve, QueryValidation) {
  auto idx = Index::from_entries({entry("a", {1, 0})});
  RetrievalQuery none;
  EXPECT_THROW(retrieve(idx, none), ValidationError);
  auto zero = vector_query({1, 0}, 0);
  EXPECT_THROW(retrieve(idx, zero), ValidationError);
  EXPECT_THROW(retrieve(idx, vector_query({1, 0, 0}, 1)), RetrievalError);
  RetrievalQuery text;
  text.query_text = "words";
  EXPECT_THROW(retrieve(idx, text), RetrievalError);
  EXPECT_THROW(RetrievalQuery::from_json(Json{{"query_text", "x"}, {"k", 0}}), ValidationError);
  auto parsed = RetrievalQuery::from_json(
      Json{{"query_text", "x"}, {"k", 3}, {"filter", {{"specialty", "derm"}}}, {"exclude_thread_id", "t9"}});
  EXPECT_EQ(parsed.k, 3u);
  EXPECT_EQ(parsed.filter.specialty, std::optional<std::string>("derm"));
  EXPECT_EQ(parsed.exclude_thread_id, std::optional<std::string>("t9"));
}

TEST(Retrieve, TextQueryUsesEmbedder) {
  HashEmbedder emb(24);
  std::vector<IndexEntry> es;
  for (const char* s : {"knee pain", "rash on arm", "refill request"}) {
    auto e = entry(s, {0});
    e.vector = emb.embed(s);
    es.push_back(e);
  }
  auto idx = Index::from_entries(es);
  RetrievalQuery q;
  q.query_text = "rash on arm";
  q.k = 1;
  auto res = retrieve(idx, q, &emb);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].message_id, "rash on arm");
  EXPECT_NEAR(res[0].similarity, 1.0, 1e-6);
}

TEST(RetrieveProperty, MatchesBruteForceScan) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto corpus = testutil::random_corpus(rng, 1 + rng() % 300, 8);
    for (size_t k : {1u, 5u, 20u}) {
      RetrievalQuery q;
      q.query_vector = corpus.pool[rng() % corpus.pool.size()];
      q.k = k;
      q.filter = testutil::random_filter(rng);
      if (rng() % 4 == 0) q.exclude_thread_id = "t" + std::to_string(rng() % 20);
      const auto got = retrieve(corpus.index, q);
      const auto want = oracle::scan(corpus.index, *q.query_vector, q.filter, k, q.exclude_thread_id);
      ASSERT_EQ(got.size(), want.size());
      for (size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].message_id, want[i].first);
        EXPECT_NEAR(got[i].similarity, want[i].second, 1e-9);
        EXPECT_EQ(got[i].rank, i + 1);
        if (i > 0) {
          EXPECT_LE(got[i].similarity, got[i - 1].similarity);
        }
      }
    }
  }
}

TEST(RetrievalEvaluation, UsefulnessAndTau) {
  std::vector<RetrievalJudgment> js{
      {"q1", {true, true, true, true, true}, {2, 1, 3, 4, 5}},
      {"q2", {true, false, true, false, true}, {1, 2, 3, 4, 5}},
      {"q3", {false, true, false, true, false}, {3, 3, 3, 3, 3}},
  };
  auto ev = evaluate_retrieval(js);
  EXPECT_EQ(ev.queries, 3u);
  EXPECT_NEAR(ev.mean_usefulness, (1.0 + 0.6 + 0.4) / 3.0, 1e-12);
  EXPECT_NEAR(ev.mean_usefulness, 0.6667, 1e-4);
  EXPECT_NEAR(ev.fraction_with_helpful, 1.0, 1e-12);
  EXPECT_EQ(ev.tau_defined, 2u);
  ASSERT_TRUE(ev.mean_kendall_tau.has_value());
  EXPECT_NEAR(*ev.mean_kendall_tau, (0.8 + 1.0) / 2.0, 1e-12);
}

TEST(RetrievalEvaluation, RejectsBadJudgments) {
  std::vector<RetrievalJudgment> empty;
  EXPECT_THROW(evaluate_retrieval(empty), StatsError);
  std::vector<RetrievalJudgment> mismatch{{"q", {true, false}, {1, 2, 3}}};
  EXPECT_THROW(evaluate_retrieval(mismatch), StatsError);
  EXPECT_THROW(RetrievalJudgment::from_json(Json{{"query_id", "q"}, {"helpful", "yes"}}),
               ValidationError);
}

TEST(RetrievalEvaluation, BundledJudgmentsLoad) {
  std::vector<RetrievalJudgment> js;
  for (const auto& j : read_jsonl(testutil::data_dir() / "synthetic" / "retrieval_judgments.jsonl")) {
    js.push_back(RetrievalJudgment::from_json(j));
  }
  auto ev = evaluate_retrieval(js);
  EXPECT_EQ(ev.queries, 25u);
  EXPECT_GT(ev.mean_usefulness, 0.0);
  EXPECT_LE(ev.mean_usefulness, 1.0);
}
