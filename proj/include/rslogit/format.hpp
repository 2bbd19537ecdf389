#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

namespace rslogit {

/// Shortest round-trip decimal form; "NA" for NaN. Locale independent.
inline std::string formatDouble(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csvField(std::string_view s, char sep = ',') {
  if (s.find_first_of(std::string{sep, '"', '\n', '\r'}) == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace rslogit
