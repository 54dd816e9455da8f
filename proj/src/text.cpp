#include "dyged/text.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dyged/error.hpp"

namespace dyged::text {

std::string format_real(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  if (ec != std::errc{}) fail(ErrorKind::contract, "format_real: conversion failed");
  return std::string(buf.data(), end);
}

double parse_real(std::string_view s, std::string_view where) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(ErrorKind::parse, std::string(where) + ": expected a real number, got '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view where) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(ErrorKind::parse, std::string(where) + ": expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string KeyValues::where(const std::string& key) const {
  auto it = lines.find(key);
  return it == lines.end() ? source : source + ":" + std::to_string(it->second);
}

namespace {

void add_pair(KeyValues& kv, std::string_view token, int line_no) {
  const auto where = kv.source + ":" + std::to_string(line_no);
  const auto eq = token.find('=');
  if (eq == std::string_view::npos) {
    fail(ErrorKind::parse, where + ": expected key=value, got '" + std::string(token) + "'");
  }
  std::string key(trim(token.substr(0, eq)));
  if (key.empty()) fail(ErrorKind::parse, where + ": empty key");
  if (kv.values.count(key)) fail(ErrorKind::parse, where + ": duplicate key '" + key + "'");
  kv.values[key] = std::string(trim(token.substr(eq + 1)));
  kv.lines[key] = line_no;
}

}  // namespace

KeyValues parse_key_values(std::string_view content, std::string source) {
  KeyValues kv;
  kv.source = std::move(source);
  int line_no = 0;
  for (auto line : split(content, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    add_pair(kv, line, line_no);
  }
  return kv;
}

KeyValues parse_key_value_line(std::string_view line, std::string source) {
  KeyValues kv;
  kv.source = std::move(source);
  for (auto token : split_ws(line)) add_pair(kv, token, 1);
  return kv;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace dyged::text
