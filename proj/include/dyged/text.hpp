#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dyged::text {

/// Shortest-form-independent canonical decimal: 17 significant digits, so
/// every double survives a write/parse round trip bit-exactly.
std::string format_real(double v);

// Parsers throw ErrorKind::parse with `where` ("file:line") in the message.
double parse_real(std::string_view s, std::string_view where);
std::int64_t parse_int(std::string_view s, std::string_view where);

std::vector<std::string_view> split(std::string_view line, char sep);
std::vector<std::string_view> split_ws(std::string_view line);
std::string_view trim(std::string_view s);

/// Ordered key=value map. Lines are `key=value`; '#' starts a comment.
struct KeyValues {
  std::string source;
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string where(const std::string& key) const;
};

KeyValues parse_key_values(std::string_view content, std::string source);
/// Whitespace-separated `key=value` tokens on a single line (dataset meta).
KeyValues parse_key_value_line(std::string_view line, std::string source);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes; throws ErrorKind::io with the path.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dyged::text
