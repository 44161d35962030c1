#include "raec/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "raec/error.hpp"
#include "raec/text.hpp"

namespace raec {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

void require_same_messages(const AnnotationSet& a, const AnnotationSet& b) {
  auto ia = a.labels.begin();
  auto ib = b.labels.begin();
  while (ia != a.labels.end() || ib != b.labels.end()) {
    if (ib == b.labels.end() || (ia != a.labels.end() && ia->first < ib->first)) {
      throw StatsError("message " + ia->first + " is labeled by " + a.source + " but not by " +
                       b.source);
    }
    if (ia == a.labels.end() || ib->first < ia->first) {
      throw StatsError("message " + ib->first + " is labeled by " + b.source + " but not by " +
                       a.source);
    }
    ++ia;
    ++ib;
  }
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

// ---------------------------------------------------------------------------

Json ConcordanceResult::to_json() const {
  Json j;
  j["level"] = std::string(to_string(level));
  j["concordant"] = concordant_count;
  j["total"] = total;
  j["rate"] = rate();
  Json per = Json::object();
  for (const auto& [id, ok] : per_message) per[id] = ok;
  j["per_message"] = std::move(per);
  return j;
}

ConcordanceResult concordance(const AnnotationSet& a, const AnnotationSet& b, Level level,
                              const Taxonomy& t) {
  require_same_messages(a, b);
  ConcordanceResult out;
  out.level = level;
  for (const auto& [id, codes] : a.labels) {
    const bool same = project(codes, level, t) == project(b.labels.at(id), level, t);
    out.per_message.emplace(id, same);
    if (same) ++out.concordant_count;
    ++out.total;
  }
  return out;
}

std::vector<std::pair<bool, bool>> pair_outcomes(const ConcordanceResult& a,
                                                 const ConcordanceResult& b) {
  if (a.per_message.size() != b.per_message.size()) {
    throw StatsError("concordance results cover different message sets");
  }
  std::vector<std::pair<bool, bool>> out;
  out.reserve(a.per_message.size());
  for (const auto& [id, ok] : a.per_message) {
    auto it = b.per_message.find(id);
    if (it == b.per_message.end()) throw StatsError("message " + id + " missing from second result");
    out.emplace_back(ok, it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(McNemarMethod m) {
  return m == McNemarMethod::kExact ? "exact" : "chi-square-cc";
}

McNemarMethod parse_mcnemar_method(const std::string& s) {
  const auto key = normalize_key(s);
  if (key == "exact") return McNemarMethod::kExact;
  if (key == "chi-square-cc" || key == "chisq" || key == "chi2") return McNemarMethod::kChiSquareCC;
  throw ValidationError("unknown McNemar method: " + s);
}

Json McNemarResult::to_json() const {
  Json j;
  j["method"] = to_string(method);
  j["b"] = b;
  j["c"] = c;
  j["statistic"] = statistic;
  j["p_value"] = p_value;
  return j;
}

double binomial_cdf_half(size_t k, size_t n) {
  if (k >= n) return 1.0;
  if (n <= 1000) {
    // pmf(0) = 2^-n, pmf(i+1) = pmf(i) * (n - i) / (i + 1); no underflow below n = 1074.
    double pmf = std::ldexp(1.0, -static_cast<int>(n));
    double sum = pmf;
    for (size_t i = 0; i < k; ++i) {
      pmf = pmf * static_cast<double>(n - i) / static_cast<double>(i + 1);
      sum += pmf;
    }
    return std::min(sum, 1.0);
  }
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  const double lg_n = std::lgamma(static_cast<double>(n) + 1.0);
  std::vector<double> terms;
  terms.reserve(k + 1);
  double max_term = -INFINITY;
  for (size_t i = 0; i <= k; ++i) {
    const double lt = lg_n - std::lgamma(static_cast<double>(i) + 1.0) -
                      std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n;
    terms.push_back(lt);
    max_term = std::max(max_term, lt);
  }
  double acc = 0.0;
  for (double lt : terms) acc += std::exp(lt - max_term);
  return std::min(1.0, std::exp(max_term + std::log(acc)));
}

double chi_square1_survival(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_from_counts(size_t b, size_t c, McNemarMethod method) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  r.method = method;
  const size_t n = b + c;
  if (n == 0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  if (method == McNemarMethod::kExact) {
    const size_t k = std::min(b, c);
    r.statistic = static_cast<double>(k);
    r.p_value = std::min(1.0, 2.0 * binomial_cdf_half(k, n));
  } else {
    const double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    r.statistic = diff * diff / static_cast<double>(n);
    r.p_value = chi_square1_survival(r.statistic);
  }
  return r;
}

McNemarResult mcnemar(std::span<const std::pair<bool, bool>> paired, McNemarMethod method) {
  if (paired.empty()) throw StatsError("McNemar test needs at least one pair");
  size_t b = 0;
  size_t c = 0;
  for (const auto& [x, y] : paired) {
    if (x && !y) ++b;
    if (!x && y) ++c;
  }
  return mcnemar_from_counts(b, c, method);
}

// ---------------------------------------------------------------------------

Json ConfusionCounts::to_json() const {
  Json j;
  j["label"] = label_id;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["tn"] = tn;
  return j;
}

std::vector<ConfusionCounts> confusion(const AnnotationSet& reference,
                                       const AnnotationSet& predicted, Level level,
                                       std::span<const std::string> universe, const Taxonomy& t) {
  require_same_messages(reference, predicted);
  std::map<std::string, size_t, std::less<>> column;
  std::vector<ConfusionCounts> out;
  out.reserve(universe.size());
  for (const auto& label : universe) {
    if (!t.has_label(level, label)) {
      throw StatsError("universe label " + label + " is not a " + std::string(to_string(level)) +
                       " in the taxonomy");
    }
    if (!column.emplace(label, out.size()).second) {
      throw StatsError("universe lists " + label + " twice");
    }
    out.push_back({label, 0, 0, 0, 0});
  }
  auto project_checked = [&](const LabelSet& codes, const std::string& message_id,
                             const std::string& source) {
    auto labels = project(codes, level, t);
    for (const auto& l : labels) {
      if (!column.contains(l)) {
        throw StatsError("label " + l + " (" + source + ", message " + message_id +
                         ") is outside the universe");
      }
    }
    return labels;
  };
  for (const auto& [id, ref_codes] : reference.labels) {
    const auto ref = project_checked(ref_codes, id, reference.source);
    const auto pred = project_checked(predicted.labels.at(id), id, predicted.source);
    for (auto& row : out) {
      const bool r = ref.contains(row.label_id);
      const bool p = pred.contains(row.label_id);
      if (r && p) {
        ++row.tp;
      } else if (p) {
        ++row.fp;
      } else if (r) {
        ++row.fn;
      } else {
        ++row.tn;
      }
    }
  }
  return out;
}

ConfusionCounts micro_aggregate(std::span<const ConfusionCounts> rows) {
  ConfusionCounts total{"micro", 0, 0, 0, 0};
  for (const auto& r : rows) {
    total.tp += r.tp;
    total.fp += r.fp;
    total.fn += r.fn;
    total.tn += r.tn;
  }
  return total;
}

Json MetricsRow::to_json() const {
  Json j;
  j["sensitivity"] = optional_number(sensitivity);
  j["specificity"] = optional_number(specificity);
  j["ppv"] = optional_number(ppv);
  j["npv"] = optional_number(npv);
  j["accuracy"] = optional_number(accuracy);
  j["f1"] = optional_number(f1);
  return j;
}

MetricsRow metrics(const ConfusionCounts& c) {
  MetricsRow m;
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  if (m.ppv && m.sensitivity && (*m.ppv + *m.sensitivity) > 0.0) {
    m.f1 = 2.0 * *m.ppv * *m.sensitivity / (*m.ppv + *m.sensitivity);
  }
  return m;
}

MetricsRow macro_average(std::span<const ConfusionCounts> rows) {
  struct Acc {
    double sum = 0.0;
    size_t n = 0;
    void add(const std::optional<double>& v) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    std::optional<double> mean() const {
      return n == 0 ? std::nullopt : std::optional<double>(sum / static_cast<double>(n));
    }
  };
  Acc sens, spec, ppv, npv, acc, f1;
  for (const auto& r : rows) {
    const auto m = metrics(r);
    sens.add(m.sensitivity);
    spec.add(m.specificity);
    ppv.add(m.ppv);
    npv.add(m.npv);
    acc.add(m.accuracy);
    f1.add(m.f1);
  }
  return {sens.mean(), spec.mean(), ppv.mean(), npv.mean(), acc.mean(), f1.mean()};
}

// ---------------------------------------------------------------------------

namespace {

// Sorts `v` and returns the number of strict inversions (pairs i<j with v[i] > v[j]).
std::uint64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t swaps = 0;
  for (size_t width = 1; width < v.size(); width *= 2) {
    for (size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const size_t mid = std::min(lo + width, v.size());
      const size_t hi = std::min(lo + 2 * width, v.size());
      size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += mid - i;
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    std::swap(v, buf);
  }
  return swaps;
}

// Sum over runs of equal adjacent values of t(t-1)/2.
template <typename Eq>
std::uint64_t tied_pairs(size_t n, Eq equal) {
  std::uint64_t pairs = 0;
  std::uint64_t run = 1;
  for (size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs;
}

}  // namespace

std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw StatsError("kendall_tau: length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  const size_t n = a.size();
  if (n < 2) throw StatsError("kendall_tau needs at least two items");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return a[x] != a[y] ? a[x] < a[y] : b[x] < b[y];
  });
  const std::uint64_t ties_a =
      tied_pairs(n, [&](size_t i, size_t j) { return a[order[i]] == a[order[j]]; });
  const std::uint64_t ties_ab = tied_pairs(n, [&](size_t i, size_t j) {
    return a[order[i]] == a[order[j]] && b[order[i]] == b[order[j]];
  });
  std::vector<double> seq(n);
  for (size_t i = 0; i < n; ++i) seq[i] = b[order[i]];
  const std::uint64_t discordant = count_inversions(seq);  // seq is now sorted
  const std::uint64_t ties_b = tied_pairs(n, [&](size_t i, size_t j) { return seq[i] == seq[j]; });

  const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  const auto n1 = static_cast<std::int64_t>(ties_a);
  const auto n2 = static_cast<std::int64_t>(ties_b);
  if (n0 == n1 || n0 == n2) return std::nullopt;
  const std::int64_t s = n0 - n1 - n2 + static_cast<std::int64_t>(ties_ab) -
                         2 * static_cast<std::int64_t>(discordant);
  return static_cast<double>(s) /
         std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

}  // namespace raec
