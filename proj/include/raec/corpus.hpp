#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "raec/io.hpp"

namespace raec {

/// One communication turn: patient message, AI draft, final clinician reply.
struct MessageTriplet {
  std::string message_id;
  std::string thread_id;
  std::string patient_message;
  std::string llm_prompt;
  std::string llm_draft;
  std::string clinician_reply;
  std::string date_sent;       // as supplied
  std::int64_t sent_epoch = 0;  // seconds since epoch, UTC
  std::string recipient_name;
  std::string message_sender;
  std::string department;
  std::string specialty;
  std::optional<bool> draft_utilized;
};

Json triplet_to_json(const MessageTriplet& t);
/// Parses an already-ingested triplet record (the ingest output schema).
MessageTriplet triplet_from_json(const Json& j);
std::vector<MessageTriplet> load_triplets(const std::filesystem::path& path);
std::string triplets_to_jsonl(const std::vector<MessageTriplet>& triplets);

/// Parses "YYYY-MM-DD", "YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]" to UTC seconds.
std::optional<std::int64_t> parse_timestamp(const std::string& s);

struct IngestReport {
  size_t accepted_count = 0;
  size_t rejected_count = 0;
  std::map<std::string, size_t> rejection_reasons;
  size_t duplicates_collapsed = 0;

  Json to_json() const;
};

struct IngestResult {
  std::vector<MessageTriplet> triplets;
  IngestReport report;
};

/// Validates raw JSON-lines records. Bad records are rejected with exactly one
/// reason; only an unreadable stream is fatal.
IngestResult ingest(std::istream& records);
IngestResult ingest(const std::vector<std::string>& lines);

/// Which text participates in the duplicate key alongside date_sent.
enum class DedupeKey { kPatientMessage, kAllText };

struct DedupeResult {
  std::vector<MessageTriplet> triplets;
  size_t duplicates_collapsed = 0;
};

/// Keeps one triplet per (text, date_sent) key: the first in stream order.
DedupeResult dedupe(const std::vector<MessageTriplet>& triplets,
                    DedupeKey key = DedupeKey::kPatientMessage);

// ---------------------------------------------------------------------------
// Sampling

/// Identifier written into sample manifests. Bump when the draw procedure changes.
inline constexpr const char* kSamplerAlgorithm = "mt19937_64+rejection-bounded+partial-fisher-yates/v1";

/// Seeded generator with a platform-independent bounded draw
/// (std::uniform_int_distribution is implementation-defined).
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniformly chooses `k` distinct indices from [0, n), in draw order.
  std::vector<size_t> choose(size_t n, size_t k);

 private:
  std::mt19937_64 engine_;
};

enum class StratumField { kSpecialty, kDepartment, kRecipientName, kMessageSender };

StratumField parse_stratum_field(const std::string& s);
std::string to_string(StratumField f);
const std::string& stratum_value(const MessageTriplet& t, StratumField f);

/// Largest-remainder apportionment of `n` over stratum sizes. Remainder ties go to
/// the larger stratum, then to the lexicographically smaller name.
std::map<std::string, size_t> largest_remainder(const std::map<std::string, size_t>& sizes,
                                                size_t n);

struct SampleManifest {
  std::string algorithm = kSamplerAlgorithm;
  std::uint64_t seed = 0;
  size_t n = 0;
  std::string stratum_field;
  std::map<std::string, size_t> allocation;
  std::map<std::string, size_t> population;

  Json to_json() const;
};

struct StratifiedSample {
  std::vector<MessageTriplet> sample;  // in input order
  SampleManifest manifest;
};

StratifiedSample stratified_sample(const std::vector<MessageTriplet>& triplets, size_t n,
                                   std::uint64_t seed,
                                   StratumField stratum = StratumField::kSpecialty);

struct ScoredTriplet {
  MessageTriplet triplet;
  bool has_error = false;
};

struct BalancedSample {
  std::vector<ScoredTriplet> sample;  // error class first, then clean; each in input order
  size_t error_taken = 0;
  size_t clean_taken = 0;
  size_t error_shortfall = 0;
  size_t clean_shortfall = 0;
  std::uint64_t seed = 0;

  Json manifest() const;
};

/// n/2 from each class. A class smaller than n/2 is taken whole and its shortfall
/// reported; the other class is never used to backfill.
BalancedSample balanced_sample(const std::vector<ScoredTriplet>& scored, size_t n,
                               std::uint64_t seed);

}  // namespace raec
