#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raec/annotation.hpp"
#include "raec/io.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

// ---------------------------------------------------------------------------
// Message-level concordance

struct ConcordanceResult {
  Level level = Level::kCode;
  std::map<std::string, bool> per_message;
  size_t concordant_count = 0;
  size_t total = 0;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(concordant_count) / total; }
  Json to_json() const;
};

/// A message is concordant when both sources project to the same label set at
/// `level`; two empty sets are concordant. Both sources must cover the same ids.
ConcordanceResult concordance(const AnnotationSet& a, const AnnotationSet& b, Level level,
                              const Taxonomy& t);

/// Pairs per-message outcomes of two concordance results over the same messages,
/// ordered by message id.
std::vector<std::pair<bool, bool>> pair_outcomes(const ConcordanceResult& a,
                                                 const ConcordanceResult& b);

// ---------------------------------------------------------------------------
// McNemar

enum class McNemarMethod { kExact, kChiSquareCC };

std::string to_string(McNemarMethod m);
McNemarMethod parse_mcnemar_method(const std::string& s);

struct McNemarResult {
  size_t b = 0;  // (true, false) pairs
  size_t c = 0;  // (false, true) pairs
  double statistic = 0.0;
  double p_value = 1.0;
  McNemarMethod method = McNemarMethod::kChiSquareCC;

  Json to_json() const;
};

McNemarResult mcnemar(std::span<const std::pair<bool, bool>> paired,
                      McNemarMethod method = McNemarMethod::kChiSquareCC);
McNemarResult mcnemar_from_counts(size_t b, size_t c,
                                  McNemarMethod method = McNemarMethod::kChiSquareCC);

/// P[X <= k] for X ~ Binomial(n, 1/2).
double binomial_cdf_half(size_t k, size_t n);
/// Upper tail of the chi-square distribution with one degree of freedom.
double chi_square1_survival(double x);

// ---------------------------------------------------------------------------
// Per-label confusion

struct ConfusionCounts {
  std::string label_id;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  Json to_json() const;
};

/// One row per universe label. Every (message, label) cell is classified: tp when
/// the label is in both projections, fp predicted-only, fn reference-only, tn
/// neither. A projected label outside `universe` is an error.
std::vector<ConfusionCounts> confusion(const AnnotationSet& reference,
                                       const AnnotationSet& predicted, Level level,
                                       std::span<const std::string> universe, const Taxonomy& t);

/// Sums counts across labels (the convention used for the headline tables).
ConfusionCounts micro_aggregate(std::span<const ConfusionCounts> rows);

/// Metrics are empty (undefined) when their denominator is zero.
struct MetricsRow {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> accuracy;
  std::optional<double> f1;

  Json to_json() const;
};

MetricsRow metrics(const ConfusionCounts& counts);

/// Unweighted mean of each metric over the labels where it is defined.
/// Not the headline convention; reports label it as macro.
MetricsRow macro_average(std::span<const ConfusionCounts> rows);

// ---------------------------------------------------------------------------
// Rank correlation

/// Kendall's tau-b in O(n log n). Empty when either ranking is constant.
/// Throws StatsError on a length mismatch or fewer than two items.
std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b);

}  // namespace raec
