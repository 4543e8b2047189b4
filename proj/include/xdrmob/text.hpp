#pragma once

// Small helpers for the line-oriented CSV and text formats used throughout.
// Fields are never quoted: cell codes, user ids and province names must not
// contain commas or newlines.

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "xdrmob/error.hpp"

namespace xdrmob::text {

inline void split(std::string_view line, char sep, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  split(line, sep, out);
  return out;
}

/// Reads one line, stripping a trailing '\r'. Returns false at end of stream.
inline bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

inline std::optional<double> parse_double(std::string_view s) {
  double value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

/// Shortest representation that round-trips; stable across runs.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: buffer too small");
  return std::string(buf, ptr);
}

template <class Int>
Int require_int(std::string_view s, std::string_view what) {
  auto v = parse_int<Int>(s);
  if (!v) throw InputError(std::string("invalid integer for ") + std::string(what) + ": '" + std::string(s) + "'");
  return *v;
}

inline double require_double(std::string_view s, std::string_view what) {
  auto v = parse_double(s);
  if (!v) throw InputError(std::string("invalid number for ") + std::string(what) + ": '" + std::string(s) + "'");
  return *v;
}

inline void expect_header(std::istream& in, std::string_view expected, std::string_view file) {
  std::string line;
  if (!read_line(in, line)) throw InputError(std::string(file) + ": empty input, expected header");
  if (line != expected)
    throw InputError(std::string(file) + ": bad header '" + line + "', expected '" + std::string(expected) + "'");
}

}  // namespace xdrmob::text
