#pragma once

// Slow, obviously-correct reference implementations used by the tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "raec/retrieval.hpp"
#include "raec/text.hpp"

namespace oracle {

/// Kendall tau-b by counting every pair.
inline std::optional<double> kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0 && db == 0) {
        ++ties_a;
        ++ties_b;
      } else if (da == 0) {
        ++ties_a;
      } else if (db == 0) {
        ++ties_b;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const long long pairs = static_cast<long long>(n * (n - 1) / 2);
  const double denom =
      std::sqrt(static_cast<double>(pairs - ties_a) * static_cast<double>(pairs - ties_b));
  if (denom == 0) return std::nullopt;
  return static_cast<double>(concordant - discordant) / denom;
}

/// Two-sided exact McNemar p-value by summing binomial(n, 1/2) terms directly.
inline double mcnemar_exact_p(size_t b, size_t c) {
  const size_t n = b + c;
  if (n == 0) return 1.0;
  const size_t k = std::min(b, c);
  // exact integer binomial coefficients via Pascal's triangle; fine for n <= 62
  std::vector<unsigned long long> row{1};
  for (size_t r = 1; r <= n; ++r) {
    std::vector<unsigned long long> next(r + 1, 1);
    for (size_t i = 1; i < r; ++i) next[i] = row[i - 1] + row[i];
    row = std::move(next);
  }
  unsigned long long count = 0;
  for (size_t i = 0; i <= k; ++i) count += row[i];
  const double tail = std::ldexp(static_cast<double>(count), -static_cast<int>(n));
  return std::min(1.0, 2.0 * tail);
}

/// Survival of chi-square(1) by integrating its density with Simpson's rule
/// after substituting x = t^2 (removes the singularity at 0).
inline double chi_square1_survival(double x) {
  if (x <= 0) return 1.0;
  const double pi = std::acos(-1.0);
  const double lo = std::sqrt(x);
  const double hi = lo + 40.0;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  auto f = [&](double t) { return 2.0 / std::sqrt(2.0 * pi) * std::exp(-t * t / 2.0); };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < steps; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double cosine(const raec::EmbeddingVector& u, const raec::EmbeddingVector& v) {
  long double dot = 0, nu = 0, nv = 0;
  for (size_t i = 0; i < u.dim(); ++i) {
    dot += static_cast<long double>(u.values()[i]) * v.values()[i];
    nu += static_cast<long double>(u.values()[i]) * u.values()[i];
    nv += static_cast<long double>(v.values()[i]) * v.values()[i];
  }
  return static_cast<double>(dot / std::sqrt(nu * nv));
}

inline bool field_matches(const std::optional<std::string>& want, const std::string& have) {
  return !want || raec::normalize_key(*want) == raec::normalize_key(have);
}

/// Exhaustive filtered scan: every entry scored, sorted by (-cosine, message_id).
inline std::vector<std::pair<std::string, double>> scan(const raec::Index& index,
                                                        const raec::EmbeddingVector& q,
                                                        const raec::MetadataFilter& f, size_t k,
                                                        const std::optional<std::string>& exclude) {
  std::vector<std::pair<std::string, double>> hits;
  for (const auto& e : index.entries()) {
    if (exclude && e.thread_id == *exclude) continue;
    if (!field_matches(f.recipient_name, e.recipient_name)) continue;
    if (!field_matches(f.department, e.department)) continue;
    if (!field_matches(f.specialty, e.specialty)) continue;
    hits.emplace_back(e.message_id, oracle::cosine(q, e.vector));
  }
  std::sort(hits.begin(), hits.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

}  // namespace oracle

namespace testutil {

inline std::filesystem::path data_dir() { return RAEC_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("raec-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
