#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raec/corpus.hpp"
#include "raec/embedding.hpp"
#include "raec/io.hpp"

namespace raec {

/// One archived message-response pair with its routing metadata.
struct IndexEntry {
  std::string message_id;
  std::string thread_id;
  std::string recipient_name;
  std::string department;
  std::string specialty;
  std::string patient_message;
  std::string response_text;
  EmbeddingVector vector;
};

/// Immutable exact-scan index over archived pairs.
///
/// Persisted as three files sharing a prefix:
///   <prefix>.vec            vector store (see write_vector_store)
///   <prefix>.meta.jsonl     one IndexEntry per row, minus the vector
///   <prefix>.manifest.json  {format, dim, rows, embedder}
class Index {
 public:
  /// One entry per triplet, vector = embed(patient_message).
  static Index build(const std::vector<MessageTriplet>& triplets, const Embedder& embedder);
  static Index from_entries(std::vector<IndexEntry> entries, Json embedder_description = {});
  static Index load(const std::filesystem::path& prefix);
  void save(const std::filesystem::path& prefix) const;

  size_t size() const noexcept { return entries_.size(); }
  size_t dim() const noexcept { return dim_; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  const Json& embedder_description() const noexcept { return embedder_; }

  // Precomputed per-entry data used by the scan.
  double norm(size_t row) const { return norms_[row]; }
  const std::string& recipient_key(size_t row) const { return keys_[row].recipient; }
  const std::string& department_key(size_t row) const { return keys_[row].department; }
  const std::string& specialty_key(size_t row) const { return keys_[row].specialty; }

 private:
  struct Keys {
    std::string recipient;
    std::string department;
    std::string specialty;
  };

  Index() = default;

  std::vector<IndexEntry> entries_;
  std::vector<double> norms_;
  std::vector<Keys> keys_;
  size_t dim_ = 0;
  Json embedder_;
};

/// dot(u, v) / (|u| |v|) with 64-bit accumulation, clamped to [-1, 1].
/// Throws RetrievalError on dimension mismatch or a zero vector.
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Exact, case-insensitive (after trimming) metadata constraints. Unset fields match anything.
struct MetadataFilter {
  std::optional<std::string> recipient_name;
  std::optional<std::string> department;
  std::optional<std::string> specialty;
};

struct RetrievalQuery {
  std::optional<std::string> query_text;
  std::optional<EmbeddingVector> query_vector;
  MetadataFilter filter;
  size_t k = 5;
  std::optional<std::string> exclude_thread_id;

  static RetrievalQuery from_json(const Json& j);
};

struct RetrievedPair {
  std::string message_id;
  std::string patient_message;
  std::string response_text;
  double similarity = 0.0;
  size_t rank = 0;  // 1-based

  Json to_json() const;
  static RetrievedPair from_json(const Json& j);
};

struct RetrieverOptions {
  /// When fewer than k candidates survive the full filter, retry without
  /// recipient_name, then without department as well. Off by default.
  bool relax_filters = false;
};

/// Filter, then rank by cosine (ties by message_id ascending), then truncate to k.
/// A text-only query needs `embedder`.
std::vector<RetrievedPair> retrieve(const Index& index, const RetrievalQuery& query,
                                    const Embedder* embedder = nullptr,
                                    RetrieverOptions options = {});

/// Source of exemplars for the enhanced guardrail.
class ExemplarSource {
 public:
  virtual ~ExemplarSource() = default;
  virtual std::vector<RetrievedPair> retrieve(const RetrievalQuery& query) const = 0;
};

class Retriever : public ExemplarSource {
 public:
  Retriever(const Index& index, const Embedder& embedder, RetrieverOptions options = {})
      : index_(index), embedder_(embedder), options_(options) {}

  std::vector<RetrievedPair> retrieve(const RetrievalQuery& query) const override {
    return raec::retrieve(index_, query, &embedder_, options_);
  }

 private:
  const Index& index_;
  const Embedder& embedder_;
  RetrieverOptions options_;
};

// ---------------------------------------------------------------------------
// Physician review of retrieved sets.

/// helpful[i] and physician_ranking[i] refer to the item at similarity rank i+1.
/// physician_ranking holds 1-based ordinal ranks; ties are allowed.
struct RetrievalJudgment {
  std::string query_id;
  std::vector<bool> helpful;
  std::vector<int> physician_ranking;

  static RetrievalJudgment from_json(const Json& j);
};

struct RetrievalEvaluation {
  size_t queries = 0;
  /// Mean over queries of helpful/retrieved.
  double mean_usefulness = 0.0;
  /// Fraction of queries with at least one helpful item.
  double fraction_with_helpful = 0.0;
  /// Mean tau-b over queries where tau is defined (non-constant ranking).
  std::optional<double> mean_kendall_tau;
  size_t tau_defined = 0;

  Json to_json() const;
};

RetrievalEvaluation evaluate_retrieval(std::span<const RetrievalJudgment> judgments);

}  // namespace raec
