#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace raec {

using Json = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Splits a stream into lines, dropping a trailing '\r' and blank lines.
std::vector<std::string> read_lines(std::istream& in);

/// Parses every non-blank line as JSON. Malformed lines throw ValidationError with
/// the 1-based line number.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::vector<Json> parse_jsonl(std::istream& in);

std::string to_jsonl(const std::vector<Json>& records);

}  // namespace raec
