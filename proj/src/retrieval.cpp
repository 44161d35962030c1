#include "raec/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "raec/error.hpp"
#include "raec/evalstats.hpp"
#include "raec/text.hpp"

namespace raec {

namespace {

double dot(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return acc;
}

double cosine_with_norms(std::span<const float> u, std::span<const float> v, double nu, double nv) {
  const double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

double checked_norm(std::span<const float> v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw RetrievalError("cosine undefined for a zero vector");
  return n;
}

Json entry_meta(const IndexEntry& e) {
  Json j;
  j["message_id"] = e.message_id;
  j["thread_id"] = e.thread_id;
  j["recipient_name"] = e.recipient_name;
  j["department"] = e.department;
  j["specialty"] = e.specialty;
  j["patient_message"] = e.patient_message;
  j["response_text"] = e.response_text;
  return j;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  return prefix.string() + suffix;
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw RetrievalError("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  return cosine_with_norms(u, v, checked_norm(u), checked_norm(v));
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine(u.values(), v.values());
}

Index Index::from_entries(std::vector<IndexEntry> entries, Json embedder_description) {
  if (entries.empty()) throw RetrievalError("cannot build an empty index");
  Index index;
  index.dim_ = entries.front().vector.dim();
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.vector.dim() != index.dim_) {
      throw RetrievalError("entry " + e.message_id + " has dim " + std::to_string(e.vector.dim()) +
                           ", expected " + std::to_string(index.dim_));
    }
    if (!ids.insert(e.message_id).second) {
      throw RetrievalError("duplicate message_id in index: " + e.message_id);
    }
    index.norms_.push_back(checked_norm(e.vector.values()));
    index.keys_.push_back({normalize_key(e.recipient_name), normalize_key(e.department),
                           normalize_key(e.specialty)});
  }
  index.entries_ = std::move(entries);
  index.embedder_ = std::move(embedder_description);
  return index;
}

Index Index::build(const std::vector<MessageTriplet>& triplets, const Embedder& embedder) {
  if (triplets.empty()) throw RetrievalError("cannot build an index from zero triplets");
  std::vector<std::string> texts;
  texts.reserve(triplets.size());
  for (const auto& t : triplets) texts.push_back(t.patient_message);

  std::vector<EmbeddingVector> vectors;
  try {
    vectors = embedder.embed_batch(texts);
  } catch (const EmbeddingError& e) {
    // Batch errors carry "texts[i]"; re-embed to find the failing message id.
    for (const auto& t : triplets) {
      try {
        (void)embedder.embed(t.patient_message);
      } catch (const EmbeddingError& inner) {
        throw EmbeddingError("embedding failed for message " + t.message_id + ": " + inner.what());
      }
    }
    throw;
  }
  std::vector<IndexEntry> entries;
  entries.reserve(triplets.size());
  for (size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    entries.push_back({t.message_id, t.thread_id, t.recipient_name, t.department, t.specialty,
                       t.patient_message, t.clinician_reply, std::move(vectors[i])});
  }
  return from_entries(std::move(entries), embedder.describe());
}

void Index::save(const std::filesystem::path& prefix) const {
  std::vector<EmbeddingVector> rows;
  rows.reserve(entries_.size());
  std::string meta;
  for (const auto& e : entries_) {
    rows.push_back(e.vector);
    meta += entry_meta(e).dump();
    meta.push_back('\n');
  }
  write_vector_store(with_suffix(prefix, ".vec"), dim_, rows);
  write_text_file(with_suffix(prefix, ".meta.jsonl"), meta);
  Json manifest;
  manifest["format"] = "raec-index/1";
  manifest["dim"] = dim_;
  manifest["rows"] = entries_.size();
  manifest["embedder"] = embedder_;
  write_text_file(with_suffix(prefix, ".manifest.json"), manifest.dump(2) + "\n");
}

Index Index::load(const std::filesystem::path& prefix) {
  const auto manifest_path = with_suffix(prefix, ".manifest.json");
  Json manifest;
  try {
    manifest = Json::parse(read_text_file(manifest_path));
  } catch (const Json::parse_error&) {
    throw ValidationError(manifest_path.string() + ": malformed manifest");
  }
  auto store = read_vector_store(with_suffix(prefix, ".vec"));
  auto meta = read_jsonl(with_suffix(prefix, ".meta.jsonl"));
  if (meta.size() != store.rows.size()) {
    throw ValidationError("index metadata has " + std::to_string(meta.size()) + " rows, vectors " +
                          std::to_string(store.rows.size()));
  }
  if (manifest.value("dim", size_t{0}) != store.dim) {
    throw ValidationError("index manifest dim does not match the vector store");
  }
  std::vector<IndexEntry> entries;
  entries.reserve(meta.size());
  for (size_t i = 0; i < meta.size(); ++i) {
    const auto& m = meta[i];
    auto get = [&m](const char* key) { return m.value(key, std::string{}); };
    entries.push_back({get("message_id"), get("thread_id"), get("recipient_name"),
                       get("department"), get("specialty"), get("patient_message"),
                       get("response_text"), std::move(store.rows[i])});
  }
  return from_entries(std::move(entries), manifest.value("embedder", Json::object()));
}

RetrievalQuery RetrievalQuery::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("retrieval query must be an object");
  RetrievalQuery q;
  q.query_text = optional_string(j, "query_text");
  if (j.contains("query_vector") && !j["query_vector"].is_null()) {
    if (!j["query_vector"].is_array()) throw ValidationError("query_vector must be an array");
    std::vector<float> values;
    for (const auto& x : j["query_vector"]) {
      if (!x.is_number()) throw ValidationError("query_vector must hold numbers");
      values.push_back(x.get<float>());
    }
    try {
      q.query_vector = EmbeddingVector(std::move(values));
    } catch (const EmbeddingError& e) {
      throw ValidationError(std::string("query_vector: ") + e.what());
    }
  }
  if (j.contains("filter") && !j["filter"].is_null()) {
    const auto& f = j["filter"];
    if (!f.is_object()) throw ValidationError("filter must be an object");
    q.filter.recipient_name = optional_string(f, "recipient_name");
    q.filter.department = optional_string(f, "department");
    q.filter.specialty = optional_string(f, "specialty");
  }
  if (j.contains("k")) {
    if (!j["k"].is_number_integer() || j["k"].get<long long>() < 1) {
      throw ValidationError("k must be an integer >= 1");
    }
    q.k = j["k"].get<size_t>();
  }
  q.exclude_thread_id = optional_string(j, "exclude_thread_id");
  if (!q.query_text && !q.query_vector) {
    throw ValidationError("retrieval query needs query_text or query_vector");
  }
  return q;
}

Json RetrievedPair::to_json() const {
  Json j;
  j["message_id"] = message_id;
  j["rank"] = rank;
  j["similarity"] = similarity;
  j["patient_message"] = patient_message;
  j["response_text"] = response_text;
  return j;
}

RetrievedPair RetrievedPair::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("retrieved pair must be an object");
  RetrievedPair p;
  p.message_id = j.value("message_id", std::string{});
  p.patient_message = j.value("patient_message", std::string{});
  p.response_text = j.value("response_text", std::string{});
  p.similarity = j.value("similarity", 0.0);
  p.rank = j.value("rank", size_t{0});
  return p;
}

std::vector<RetrievedPair> retrieve(const Index& index, const RetrievalQuery& query,
                                    const Embedder* embedder, RetrieverOptions options) {
  if (index.size() == 0) throw RetrievalError("empty index");
  if (query.k == 0) throw ValidationError("k must be >= 1");

  EmbeddingVector qv;
  if (query.query_vector) {
    qv = *query.query_vector;
  } else if (query.query_text) {
    if (embedder == nullptr) throw RetrievalError("text query without an embedder");
    qv = embedder->embed(*query.query_text);
  } else {
    throw ValidationError("retrieval query needs query_text or query_vector");
  }
  if (qv.dim() != index.dim()) {
    throw RetrievalError("dimension mismatch: query " + std::to_string(qv.dim()) + ", index " +
                         std::to_string(index.dim()));
  }
  const double qnorm = checked_norm(qv.values());

  auto key_or_empty = [](const std::optional<std::string>& v) {
    return v ? std::optional<std::string>(normalize_key(*v)) : std::nullopt;
  };
  const auto recipient = key_or_empty(query.filter.recipient_name);
  const auto department = key_or_empty(query.filter.department);
  const auto specialty = key_or_empty(query.filter.specialty);

  struct Candidate {
    double similarity;
    size_t row;
  };
  auto scan = [&](bool use_recipient, bool use_department) {
    std::vector<Candidate> out;
    for (size_t row = 0; row < index.size(); ++row) {
      const auto& e = index.entries()[row];
      if (use_recipient && recipient && index.recipient_key(row) != *recipient) continue;
      if (use_department && department && index.department_key(row) != *department) continue;
      if (specialty && index.specialty_key(row) != *specialty) continue;
      if (query.exclude_thread_id && e.thread_id == *query.exclude_thread_id) continue;
      out.push_back({cosine_with_norms(qv.values(), e.vector.values(), qnorm, index.norm(row)), row});
    }
    return out;
  };

  auto candidates = scan(true, true);
  if (options.relax_filters && candidates.size() < query.k) {
    if (recipient) candidates = scan(false, true);
    if (candidates.size() < query.k && department) candidates = scan(false, false);
  }

  const auto& entries = index.entries();
  auto better = [&entries](const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return entries[a.row].message_id < entries[b.row].message_id;
  };
  const size_t k = std::min(query.k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), better);

  std::vector<RetrievedPair> out;
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    const auto& e = entries[candidates[i].row];
    out.push_back({e.message_id, e.patient_message, e.response_text, candidates[i].similarity, i + 1});
  }
  return out;
}

// ---------------------------------------------------------------------------

RetrievalJudgment RetrievalJudgment::from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("retrieval judgment must be an object");
  RetrievalJudgment r;
  if (!j.contains("query_id")) throw ValidationError("retrieval judgment missing query_id");
  r.query_id = j["query_id"].is_string() ? j["query_id"].get<std::string>() : j["query_id"].dump();
  if (!j.contains("helpful") || !j["helpful"].is_array()) {
    throw ValidationError("judgment " + r.query_id + ": helpful must be an array");
  }
  for (const auto& h : j["helpful"]) {
    if (!h.is_boolean()) throw ValidationError("judgment " + r.query_id + ": helpful must hold booleans");
    r.helpful.push_back(h.get<bool>());
  }
  if (!j.contains("physician_ranking") || !j["physician_ranking"].is_array()) {
    throw ValidationError("judgment " + r.query_id + ": physician_ranking must be an array");
  }
  for (const auto& x : j["physician_ranking"]) {
    if (!x.is_number_integer()) {
      throw ValidationError("judgment " + r.query_id + ": physician_ranking must hold integers");
    }
    r.physician_ranking.push_back(x.get<int>());
  }
  return r;
}

Json RetrievalEvaluation::to_json() const {
  Json j;
  j["queries"] = queries;
  j["mean_usefulness"] = mean_usefulness;
  j["fraction_with_helpful"] = fraction_with_helpful;
  j["mean_kendall_tau"] = mean_kendall_tau ? Json(*mean_kendall_tau) : Json(nullptr);
  j["tau_defined_queries"] = tau_defined;
  return j;
}

RetrievalEvaluation evaluate_retrieval(std::span<const RetrievalJudgment> judgments) {
  if (judgments.empty()) throw StatsError("no retrieval judgments");
  RetrievalEvaluation out;
  out.queries = judgments.size();
  double usefulness = 0.0;
  double tau_sum = 0.0;
  size_t with_helpful = 0;
  for (const auto& j : judgments) {
    const size_t n = j.helpful.size();
    if (n == 0) throw StatsError("judgment " + j.query_id + " has no retrieved items");
    if (j.physician_ranking.size() != n) {
      throw StatsError("judgment " + j.query_id + ": ranking length differs from helpful flags");
    }
    if (n < 2) throw StatsError("judgment " + j.query_id + " needs >= 2 ranked items for tau");
    for (int r : j.physician_ranking) {
      if (r < 1 || static_cast<size_t>(r) > n) {
        throw StatsError("judgment " + j.query_id + ": rank " + std::to_string(r) +
                         " outside 1.." + std::to_string(n));
      }
    }
    const auto helpful = static_cast<size_t>(std::count(j.helpful.begin(), j.helpful.end(), true));
    usefulness += static_cast<double>(helpful) / static_cast<double>(n);
    if (helpful > 0) ++with_helpful;

    std::vector<double> similarity_rank(n);
    std::vector<double> physician(n);
    for (size_t i = 0; i < n; ++i) {
      similarity_rank[i] = static_cast<double>(i + 1);
      physician[i] = j.physician_ranking[i];
    }
    if (auto tau = kendall_tau(similarity_rank, physician)) {
      tau_sum += *tau;
      ++out.tau_defined;
    }
  }
  out.mean_usefulness = usefulness / static_cast<double>(judgments.size());
  out.fraction_with_helpful = static_cast<double>(with_helpful) / static_cast<double>(judgments.size());
  if (out.tau_defined > 0) out.mean_kendall_tau = tau_sum / static_cast<double>(out.tau_defined);
  return out;
}

}  // namespace raec
