#include "raec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

bool read_digits(const std::string& s, size_t& pos, size_t count, int& out) {
  if (pos + count > s.size()) return false;
  out = 0;
  for (size_t i = 0; i < count; ++i) {
    const char c = s[pos + i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    out = out * 10 + (c - '0');
  }
  pos += count;
  return true;
}

bool expect(const std::string& s, size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

std::string normalize_record_type(const std::string& raw) {
  std::string out = normalize_key(raw);
  std::replace(out.begin(), out.end(), '_', ' ');
  std::replace(out.begin(), out.end(), '-', ' ');
  return out;
}

std::string derive_message_id(const MessageTriplet& t) {
  const std::string key = t.thread_id + '\x1f' + t.date_sent + '\x1f' + t.patient_message;
  return "m-" + sha256_hex(key).substr(0, 16);
}

// Outcome of validating one raw record: a triplet or a single rejection reason.
struct RecordOutcome {
  std::optional<MessageTriplet> triplet;
  std::string reason;
};

RecordOutcome check_record(const std::string& line) {
  Json r;
  try {
    r = Json::parse(line);
  } catch (const Json::parse_error&) {
    return {std::nullopt, "malformed record"};
  }
  if (!r.is_object()) return {std::nullopt, "malformed record"};

  auto field_state = [&r](const char* key) -> int {
    // 0 = present non-empty string, 1 = missing/null/blank, 2 = wrong type
    if (!r.contains(key) || r[key].is_null()) return 1;
    if (!r[key].is_string()) return 2;
    return trim(r[key].get_ref<const std::string&>()).empty() ? 1 : 0;
  };
  auto text = [&r](const char* key) -> std::string {
    if (!r.contains(key) || !r[key].is_string()) return {};
    return r[key].get<std::string>();
  };

  switch (field_state("record_type")) {
    case 1:
      return {std::nullopt, "missing field: record_type"};
    case 2:
      return {std::nullopt, "invalid field type: record_type"};
    default:
      break;
  }
  if (normalize_record_type(text("record_type")) != "patient message") {
    return {std::nullopt, "system/administrative"};
  }
  for (const char* key :
       {"patient_message", "llm_draft", "clinician_reply", "date_sent", "specialty"}) {
    const int state = field_state(key);
    if (state == 1) return {std::nullopt, std::string("missing field: ") + key};
    if (state == 2) return {std::nullopt, std::string("invalid field type: ") + key};
  }
  for (const char* key :
       {"thread_id", "llm_prompt", "recipient_name", "message_sender", "department", "message_id"}) {
    if (field_state(key) == 2) return {std::nullopt, std::string("invalid field type: ") + key};
  }

  MessageTriplet t;
  t.thread_id = text("thread_id");
  t.patient_message = text("patient_message");
  t.llm_prompt = text("llm_prompt");
  t.llm_draft = text("llm_draft");
  t.clinician_reply = text("clinician_reply");
  t.date_sent = trim(text("date_sent"));
  t.recipient_name = text("recipient_name");
  t.message_sender = text("message_sender");
  t.department = text("department");
  t.specialty = text("specialty");
  const auto epoch = parse_timestamp(t.date_sent);
  if (!epoch) return {std::nullopt, "invalid date_sent"};
  t.sent_epoch = *epoch;
  if (r.contains("draft_utilized") && !r["draft_utilized"].is_null()) {
    if (!r["draft_utilized"].is_boolean()) {
      return {std::nullopt, "invalid field type: draft_utilized"};
    }
    t.draft_utilized = r["draft_utilized"].get<bool>();
  }
  t.message_id = trim(text("message_id"));
  if (t.message_id.empty()) t.message_id = derive_message_id(t);
  return {std::move(t), {}};
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(const std::string& s) {
  size_t pos = 0;
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_digits(s, pos, 4, year) || !expect(s, pos, '-') || !read_digits(s, pos, 2, month) ||
      !expect(s, pos, '-') || !read_digits(s, pos, 2, day)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) return std::nullopt;
  std::int64_t offset_seconds = 0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
    ++pos;
    if (!read_digits(s, pos, 2, hour) || !expect(s, pos, ':') || !read_digits(s, pos, 2, minute)) {
      return std::nullopt;
    }
    if (expect(s, pos, ':') && !read_digits(s, pos, 2, second)) return std::nullopt;
    if (expect(s, pos, '.')) {
      const size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == start) return std::nullopt;
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
    if (pos < s.size()) {
      if (s[pos] == 'Z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '+' ? 1 : -1;
        ++pos;
        int oh = 0, om = 0;
        if (!read_digits(s, pos, 2, oh)) return std::nullopt;
        expect(s, pos, ':');
        if (!read_digits(s, pos, 2, om)) return std::nullopt;
        offset_seconds = sign * (oh * 3600 + om * 60);
      }
    }
    if (pos != s.size()) return std::nullopt;
  }
  return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
         hour * 3600 + minute * 60 + second - offset_seconds;
}

Json triplet_to_json(const MessageTriplet& t) {
  Json j;
  j["message_id"] = t.message_id;
  j["thread_id"] = t.thread_id;
  j["patient_message"] = t.patient_message;
  j["llm_prompt"] = t.llm_prompt;
  j["llm_draft"] = t.llm_draft;
  j["clinician_reply"] = t.clinician_reply;
  j["date_sent"] = t.date_sent;
  j["recipient_name"] = t.recipient_name;
  j["message_sender"] = t.message_sender;
  j["department"] = t.department;
  j["specialty"] = t.specialty;
  j["draft_utilized"] = t.draft_utilized ? Json(*t.draft_utilized) : Json(nullptr);
  return j;
}

MessageTriplet triplet_from_json(const Json& j) {
  Json raw = j;
  if (!raw.is_object()) throw ValidationError("triplet record must be an object");
  if (!raw.contains("record_type")) raw["record_type"] = "patient_message";
  auto outcome = check_record(raw.dump());
  if (!outcome.triplet) throw ValidationError("invalid triplet record: " + outcome.reason);
  return std::move(*outcome.triplet);
}

std::vector<MessageTriplet> load_triplets(const std::filesystem::path& path) {
  std::vector<MessageTriplet> out;
  size_t row = 0;
  for (const auto& j : read_jsonl(path)) {
    ++row;
    try {
      out.push_back(triplet_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + " record " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

std::string triplets_to_jsonl(const std::vector<MessageTriplet>& triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += triplet_to_json(t).dump();
    out.push_back('\n');
  }
  return out;
}

Json IngestReport::to_json() const {
  Json j;
  j["accepted_count"] = accepted_count;
  j["rejected_count"] = rejected_count;
  j["rejection_reasons"] = Json::object();
  for (const auto& [reason, count] : rejection_reasons) j["rejection_reasons"][reason] = count;
  j["duplicates_collapsed"] = duplicates_collapsed;
  return j;
}

IngestResult ingest(const std::vector<std::string>& lines) {
  IngestResult result;
  for (const auto& line : lines) {
    auto outcome = check_record(line);
    if (outcome.triplet) {
      result.triplets.push_back(std::move(*outcome.triplet));
      ++result.report.accepted_count;
    } else {
      ++result.report.rejection_reasons[outcome.reason];
      ++result.report.rejected_count;
    }
  }
  return result;
}

IngestResult ingest(std::istream& records) {
  if (!records) throw IoError("unreadable input stream");
  return ingest(read_lines(records));
}

DedupeResult dedupe(const std::vector<MessageTriplet>& triplets, DedupeKey key) {
  using Key = std::tuple<std::string, std::string, std::string, std::int64_t>;
  std::set<Key> seen;
  DedupeResult result;
  for (const auto& t : triplets) {
    Key k = key == DedupeKey::kAllText
                ? Key{t.patient_message, t.llm_draft, t.clinician_reply, t.sent_epoch}
                : Key{t.patient_message, {}, {}, t.sent_epoch};
    // Equal keys share a timestamp, so the first in stream is also the earliest.
    if (seen.insert(std::move(k)).second) {
      result.triplets.push_back(t);
    } else {
      ++result.duplicates_collapsed;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::uint64_t SampleRng::below(std::uint64_t bound) {
  if (bound == 0) throw SamplingError("SampleRng::below requires a positive bound");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

std::vector<size_t> SampleRng::choose(size_t n, size_t k) {
  if (k > n) throw SamplingError("cannot choose more items than available");
  std::vector<size_t> pool(n);
  std::iota(pool.begin(), pool.end(), size_t{0});
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

StratumField parse_stratum_field(const std::string& s) {
  const auto key = normalize_key(s);
  if (key == "specialty") return StratumField::kSpecialty;
  if (key == "department") return StratumField::kDepartment;
  if (key == "recipient_name") return StratumField::kRecipientName;
  if (key == "message_sender") return StratumField::kMessageSender;
  throw ValidationError("unknown stratum field: " + s);
}

std::string to_string(StratumField f) {
  switch (f) {
    case StratumField::kSpecialty:
      return "specialty";
    case StratumField::kDepartment:
      return "department";
    case StratumField::kRecipientName:
      return "recipient_name";
    case StratumField::kMessageSender:
      return "message_sender";
  }
  return "specialty";
}

const std::string& stratum_value(const MessageTriplet& t, StratumField f) {
  switch (f) {
    case StratumField::kSpecialty:
      return t.specialty;
    case StratumField::kDepartment:
      return t.department;
    case StratumField::kRecipientName:
      return t.recipient_name;
    case StratumField::kMessageSender:
      return t.message_sender;
  }
  return t.specialty;
}

std::map<std::string, size_t> largest_remainder(const std::map<std::string, size_t>& sizes,
                                                size_t n) {
  size_t total = 0;
  for (const auto& [_, s] : sizes) total += s;
  if (total == 0) throw SamplingError("empty population");
  if (n > total) {
    throw SamplingError("sample size " + std::to_string(n) + " exceeds population " +
                        std::to_string(total));
  }
  __extension__ typedef unsigned __int128 Wide;
  struct Share {
    std::string name;
    size_t size;
    size_t floor;
    Wide remainder;  // numerator of the fractional part over `total`
  };
  std::vector<Share> shares;
  size_t assigned = 0;
  for (const auto& [name, s] : sizes) {
    const auto exact = static_cast<Wide>(n) * s;
    const auto fl = static_cast<size_t>(exact / total);
    shares.push_back({name, s, fl, exact % total});
    assigned += fl;
  }
  std::vector<size_t> order(shares.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&shares](size_t a, size_t b) {
    const auto& x = shares[a];
    const auto& y = shares[b];
    if (x.remainder != y.remainder) return x.remainder > y.remainder;
    if (x.size != y.size) return x.size > y.size;
    return x.name < y.name;
  });
  std::map<std::string, size_t> allocation;
  for (const auto& s : shares) allocation[s.name] = s.floor;
  for (size_t i = 0; assigned < n; ++i, ++assigned) ++allocation[shares[order[i]].name];
  return allocation;
}

Json SampleManifest::to_json() const {
  Json j;
  j["algorithm"] = algorithm;
  j["seed"] = seed;
  j["n"] = n;
  j["stratum_field"] = stratum_field;
  j["allocation"] = Json::object();
  for (const auto& [k, v] : allocation) j["allocation"][k] = v;
  j["population"] = Json::object();
  for (const auto& [k, v] : population) j["population"][k] = v;
  return j;
}

StratifiedSample stratified_sample(const std::vector<MessageTriplet>& triplets, size_t n,
                                   std::uint64_t seed, StratumField stratum) {
  if (triplets.empty()) throw SamplingError("empty population");
  std::map<std::string, std::vector<size_t>> members;
  for (size_t i = 0; i < triplets.size(); ++i) {
    members[stratum_value(triplets[i], stratum)].push_back(i);
  }
  std::map<std::string, size_t> sizes;
  for (const auto& [name, idx] : members) sizes[name] = idx.size();

  StratifiedSample out;
  out.manifest.seed = seed;
  out.manifest.n = n;
  out.manifest.stratum_field = to_string(stratum);
  out.manifest.population = sizes;
  out.manifest.allocation = largest_remainder(sizes, n);

  // Strata are visited in lexicographic order so the draw sequence is fixed by the seed.
  SampleRng rng(seed);
  std::vector<size_t> picked;
  picked.reserve(n);
  for (const auto& [name, idx] : members) {
    for (size_t j : rng.choose(idx.size(), out.manifest.allocation.at(name))) {
      picked.push_back(idx[j]);
    }
  }
  std::sort(picked.begin(), picked.end());
  out.sample.reserve(picked.size());
  for (size_t i : picked) out.sample.push_back(triplets[i]);
  return out;
}

Json BalancedSample::manifest() const {
  Json j;
  j["algorithm"] = kSamplerAlgorithm;
  j["seed"] = seed;
  j["error_taken"] = error_taken;
  j["clean_taken"] = clean_taken;
  j["error_shortfall"] = error_shortfall;
  j["clean_shortfall"] = clean_shortfall;
  return j;
}

BalancedSample balanced_sample(const std::vector<ScoredTriplet>& scored, size_t n,
                               std::uint64_t seed) {
  if (n % 2 != 0) throw SamplingError("balanced sample size must be even, got " + std::to_string(n));
  std::vector<size_t> errors;
  std::vector<size_t> clean;
  for (size_t i = 0; i < scored.size(); ++i) {
    (scored[i].has_error ? errors : clean).push_back(i);
  }
  if (errors.empty() && clean.empty()) throw SamplingError("both classes are empty");

  BalancedSample out;
  out.seed = seed;
  const size_t half = n / 2;
  SampleRng rng(seed);
  auto take = [&](const std::vector<size_t>& cls, size_t& taken, size_t& shortfall) {
    const size_t k = std::min(half, cls.size());
    taken = k;
    shortfall = half - k;
    auto chosen = rng.choose(cls.size(), k);
    std::sort(chosen.begin(), chosen.end());
    for (size_t j : chosen) out.sample.push_back(scored[cls[j]]);
  };
  take(errors, out.error_taken, out.error_shortfall);
  take(clean, out.clean_taken, out.clean_shortfall);
  return out;
}

}  // namespace raec
