#pragma once

#include <map>
#include <string>
#include <vector>

#include "raec/corpus.hpp"
#include "raec/evalstats.hpp"
#include "raec/io.hpp"
#include "raec/judge.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

/// Left-aligned first column, right-aligned rest, two-space gutters.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);
/// Fixed-point rendering; empty optionals print as "n/a".
std::string format_number(std::optional<double> v, int decimals = 3);

struct ReportOptions {
  /// Assignments below this confidence are ignored. 0 keeps everything.
  double min_confidence = 0.0;
};

struct ErrorSummary {
  size_t total_messages = 0;
  size_t cases_with_error = 0;
  size_t total_errors = 0;
  double error_rate = 0.0;
  /// Every domain of the taxonomy, zero included. A message counts once per domain.
  std::map<std::string, size_t> domain_counts;

  Json to_json() const;
  std::string to_text(const Taxonomy& t) const;
};

ErrorSummary summarize(const std::vector<GuardrailVerdict>& verdicts, const Taxonomy& t,
                       const ReportOptions& options = {});

struct CodeShare {
  std::string code_id;
  size_t count = 0;
  double share = 0.0;
};

/// Share of all error instances per code, sorted by count descending then id.
/// Throws StatsError when there are no errors.
std::vector<CodeShare> relative_frequencies(const std::vector<GuardrailVerdict>& verdicts,
                                            const ReportOptions& options = {});
std::vector<CodeShare> top_k(const std::vector<CodeShare>& shares, size_t k);

enum class FrequencyDenominator { kPerMessage, kPerInstance };

struct GroupStats {
  size_t messages = 0;
  size_t errors = 0;
  double errors_per_draft = 0.0;
  std::map<std::string, double> frequency_pct;  // code -> percent
};

struct FrequencyDelta {
  std::string code_id;
  double freq_utilized = 0.0;
  double freq_discarded = 0.0;
  double delta_pp = 0.0;
};

struct UtilizationReport {
  FrequencyDenominator denominator = FrequencyDenominator::kPerMessage;
  GroupStats utilized;
  GroupStats discarded;
  /// Sorted by |delta_pp| descending, then code id.
  std::vector<FrequencyDelta> deltas;

  Json to_json() const;
  std::string to_text() const;
};

/// Errors per draft; throws StatsError when the group is empty.
double errors_per_draft(size_t errors, size_t messages);

/// Builds the delta list from two per-code frequency maps; a code missing on
/// one side counts as 0 there.
std::vector<FrequencyDelta> frequency_deltas(const std::map<std::string, double>& utilized,
                                             const std::map<std::string, double>& discarded);

/// Joins verdicts to triplets by message id and splits them on draft_utilized.
/// Throws ValidationError listing every verdict whose triplet lacks the flag,
/// and StatsError when either group is empty.
UtilizationReport stratify_by_utilization(
    const std::vector<GuardrailVerdict>& verdicts, const std::vector<MessageTriplet>& triplets,
    FrequencyDenominator denominator = FrequencyDenominator::kPerMessage,
    const ReportOptions& options = {});

/// Metrics table rows: one per label plus micro and macro summaries.
std::string metrics_table(const std::vector<ConfusionCounts>& rows);
Json metrics_json(const std::vector<ConfusionCounts>& rows, Level level,
                  const std::string& universe_scope);

}  // namespace raec
