#pragma once

#include <string>
#include <string_view>

namespace raec {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercase, trimmed form used for case-insensitive metadata matching.
std::string normalize_key(std::string_view s);

/// "Chart Contamination/Wrong Patient Data" -> "chart-contamination-wrong-patient-data".
std::string slugify(std::string_view name);

bool is_slug(std::string_view id);

/// Hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace raec
