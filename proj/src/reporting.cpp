#include "raec/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "raec/error.hpp"

namespace raec {

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size(), 0);
  for (size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw ValidationError("table row width mismatch");
    for (size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      const std::string pad(width[c] - cells[c].size(), ' ');
      out += c == 0 ? cells[c] + pad : pad + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  size_t total = 0;
  for (size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
  out += std::string(total, '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string format_number(std::optional<double> v, int decimals) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, *v);
  return buf;
}

namespace {

std::vector<const ErrorAssignment*> kept(const GuardrailVerdict& v, const ReportOptions& o) {
  std::vector<const ErrorAssignment*> out;
  for (const auto& a : v.assignments) {
    if (a.confidence >= o.min_confidence) out.push_back(&a);
  }
  return out;
}

Json group_json(const GroupStats& g) {
  Json j = Json::object();
  j["messages"] = g.messages;
  j["errors"] = g.errors;
  j["errors_per_draft"] = g.errors_per_draft;
  j["frequency_pct"] = Json::object();
  for (const auto& [code, f] : g.frequency_pct) j["frequency_pct"][code] = f;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

Json ErrorSummary::to_json() const {
  Json j = Json::object();
  j["total_messages"] = total_messages;
  j["cases_with_error"] = cases_with_error;
  j["error_rate"] = error_rate;
  j["total_errors"] = total_errors;
  j["domain_counts"] = Json::object();
  for (const auto& [d, n] : domain_counts) j["domain_counts"][d] = n;
  return j;
}

std::string ErrorSummary::to_text(const Taxonomy& t) const {
  std::string out;
  out += "Messages: " + std::to_string(total_messages) + "\n";
  out += "Cases with >= 1 error: " + std::to_string(cases_with_error) + "\n";
  out += "Error rate (%): " + format_number(error_rate * 100.0, 1) + "\n";
  out += "Total errors: " + std::to_string(total_errors) + "\n\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : t.domains()) {
    auto it = domain_counts.find(d.id);
    rows.push_back({d.name, std::to_string(it == domain_counts.end() ? 0 : it->second)});
  }
  return out + format_table({"Domain", "Messages"}, rows);
}

ErrorSummary summarize(const std::vector<GuardrailVerdict>& verdicts, const Taxonomy& t,
                       const ReportOptions& options) {
  ErrorSummary s;
  for (const auto& d : t.domains()) s.domain_counts[d.id] = 0;
  s.total_messages = verdicts.size();
  for (const auto& v : verdicts) {
    const auto as = kept(v, options);
    if (!as.empty()) ++s.cases_with_error;
    s.total_errors += as.size();
    std::set<std::string> domains;
    for (const auto* a : as) {
      if (!t.has_code(a->code_id)) {
        throw ValidationError("verdict " + v.message_id + " names unknown code: " + a->code_id);
      }
      domains.insert(t.ancestor(a->code_id, Level::kDomain));
    }
    for (const auto& d : domains) ++s.domain_counts[d];
  }
  s.error_rate = s.total_messages == 0 ? 0.0
                                       : static_cast<double>(s.cases_with_error) / s.total_messages;
  return s;
}

std::vector<CodeShare> relative_frequencies(const std::vector<GuardrailVerdict>& verdicts,
                                            const ReportOptions& options) {
  std::map<std::string, size_t> counts;
  size_t total = 0;
  for (const auto& v : verdicts) {
    for (const auto* a : kept(v, options)) {
      ++counts[a->code_id];
      ++total;
    }
  }
  if (total == 0) throw StatsError("relative frequencies need at least one error");
  std::vector<CodeShare> out;
  for (const auto& [code, n] : counts) {
    out.push_back({code, n, static_cast<double>(n) / static_cast<double>(total)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const CodeShare& a, const CodeShare& b) { return a.count > b.count; });
  return out;
}

std::vector<CodeShare> top_k(const std::vector<CodeShare>& shares, size_t k) {
  return {shares.begin(), shares.begin() + static_cast<std::ptrdiff_t>(std::min(k, shares.size()))};
}

double errors_per_draft(size_t errors, size_t messages) {
  if (messages == 0) throw StatsError("errors per draft of an empty group");
  return static_cast<double>(errors) / static_cast<double>(messages);
}

std::vector<FrequencyDelta> frequency_deltas(const std::map<std::string, double>& utilized,
                                             const std::map<std::string, double>& discarded) {
  std::set<std::string> codes;
  for (const auto& kv : utilized) codes.insert(kv.first);
  for (const auto& kv : discarded) codes.insert(kv.first);
  std::vector<FrequencyDelta> out;
  for (const auto& code : codes) {
    FrequencyDelta d;
    d.code_id = code;
    if (auto it = utilized.find(code); it != utilized.end()) d.freq_utilized = it->second;
    if (auto it = discarded.find(code); it != discarded.end()) d.freq_discarded = it->second;
    d.delta_pp = d.freq_utilized - d.freq_discarded;
    out.push_back(d);
  }
  // codes are already in id order, so stable_sort leaves ties by id
  std::stable_sort(out.begin(), out.end(), [](const FrequencyDelta& a, const FrequencyDelta& b) {
    return std::fabs(a.delta_pp) > std::fabs(b.delta_pp);
  });
  return out;
}

UtilizationReport stratify_by_utilization(const std::vector<GuardrailVerdict>& verdicts,
                                          const std::vector<MessageTriplet>& triplets,
                                          FrequencyDenominator denominator,
                                          const ReportOptions& options) {
  std::map<std::string, const MessageTriplet*> by_id;
  for (const auto& t : triplets) by_id[t.message_id] = &t;

  std::vector<std::string> missing;
  for (const auto& v : verdicts) {
    auto it = by_id.find(v.message_id);
    if (it == by_id.end() || !it->second->draft_utilized) missing.push_back(v.message_id);
  }
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw ValidationError(std::to_string(missing.size()) +
                          " message(s) lack draft_utilized: " + list);
  }

  struct Acc {
    size_t messages = 0;
    size_t errors = 0;
    std::map<std::string, size_t> per_message;
    std::map<std::string, size_t> per_instance;
  };
  Acc acc[2];  // [0] discarded, [1] utilized
  for (const auto& v : verdicts) {
    auto& a = acc[*by_id[v.message_id]->draft_utilized ? 1 : 0];
    ++a.messages;
    std::set<std::string> seen;
    for (const auto* e : kept(v, options)) {
      ++a.errors;
      ++a.per_instance[e->code_id];
      if (seen.insert(e->code_id).second) ++a.per_message[e->code_id];
    }
  }
  if (acc[1].messages == 0) throw StatsError("no verdicts for utilized drafts");
  if (acc[0].messages == 0) throw StatsError("no verdicts for discarded drafts");

  auto finish = [&](const Acc& a) {
    GroupStats g;
    g.messages = a.messages;
    g.errors = a.errors;
    g.errors_per_draft = errors_per_draft(a.errors, a.messages);
    const auto& counts = denominator == FrequencyDenominator::kPerMessage ? a.per_message : a.per_instance;
    const size_t denom = denominator == FrequencyDenominator::kPerMessage ? a.messages : a.errors;
    for (const auto& [code, n] : counts) {
      g.frequency_pct[code] = 100.0 * static_cast<double>(n) / static_cast<double>(denom);
    }
    return g;
  };
  UtilizationReport r;
  r.denominator = denominator;
  r.utilized = finish(acc[1]);
  r.discarded = finish(acc[0]);
  r.deltas = frequency_deltas(r.utilized.frequency_pct, r.discarded.frequency_pct);
  return r;
}

Json UtilizationReport::to_json() const {
  Json j = Json::object();
  j["denominator"] = denominator == FrequencyDenominator::kPerMessage ? "per-message" : "per-instance";
  j["utilized"] = group_json(utilized);
  j["discarded"] = group_json(discarded);
  j["deltas"] = Json::array();
  for (const auto& d : deltas) {
    j["deltas"].push_back({{"code_id", d.code_id},
                           {"freq_utilized", d.freq_utilized},
                           {"freq_discarded", d.freq_discarded},
                           {"delta_pp", d.delta_pp}});
  }
  return j;
}

std::string UtilizationReport::to_text() const {
  std::string out;
  out += format_table({"Group", "Messages", "Errors", "Errors/draft"},
                      {{"utilized", std::to_string(utilized.messages), std::to_string(utilized.errors),
                        format_number(utilized.errors_per_draft, 2)},
                       {"discarded", std::to_string(discarded.messages),
                        std::to_string(discarded.errors), format_number(discarded.errors_per_draft, 2)}});
  out += "\nFrequency (%, ";
  out += denominator == FrequencyDenominator::kPerMessage ? "per message" : "per error instance";
  out += ")\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : deltas) {
    rows.push_back({d.code_id, format_number(d.freq_utilized, 1), format_number(d.freq_discarded, 1),
                    format_number(d.delta_pp, 1)});
  }
  return out + format_table({"Code", "Utilized", "Discarded", "Delta (pp)"}, rows);
}

std::string metrics_table(const std::vector<ConfusionCounts>& rows) {
  std::vector<std::vector<std::string>> cells;
  auto add = [&](const std::string& label, const ConfusionCounts* c, const MetricsRow& m) {
    cells.push_back({label, c ? std::to_string(c->tp) : "", c ? std::to_string(c->fp) : "",
                     c ? std::to_string(c->fn) : "", c ? std::to_string(c->tn) : "",
                     format_number(m.sensitivity), format_number(m.specificity),
                     format_number(m.ppv), format_number(m.npv), format_number(m.accuracy),
                     format_number(m.f1)});
  };
  for (const auto& r : rows) add(r.label_id, &r, metrics(r));
  const auto micro = micro_aggregate(rows);
  add("micro", &micro, metrics(micro));
  add("macro", nullptr, macro_average(rows));
  return format_table({"Label", "TP", "FP", "FN", "TN", "Sens", "Spec", "PPV", "NPV", "Acc", "F1"},
                      cells);
}

Json metrics_json(const std::vector<ConfusionCounts>& rows, Level level,
                  const std::string& universe_scope) {
  Json j = Json::object();
  j["level"] = std::string(to_string(level));
  j["universe"] = universe_scope;
  j["labels"] = Json::array();
  for (const auto& r : rows) {
    auto row = r.to_json();
    row["metrics"] = metrics(r).to_json();
    j["labels"].push_back(row);
  }
  const auto micro = micro_aggregate(rows);
  auto m = micro.to_json();
  m["metrics"] = metrics(micro).to_json();
  j["micro"] = m;
  j["macro"] = macro_average(rows).to_json();
  return j;
}

}  // namespace raec
