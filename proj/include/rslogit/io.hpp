#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "rslogit/core.hpp"
#include "rslogit/format.hpp"
#include "rslogit/synthetic.hpp"

namespace rslogit {

enum class TableFormat { Auto, Csv, Tsv };

/// Raw delimited text: header plus string cells, with source line numbers for error reporting.
struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  std::string where(std::size_t row, std::size_t col) const {
    std::string s = source + ":" + std::to_string(lines.at(row));
    if (col < header.size()) s += ": column '" + header[col] + "'";
    return s;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> splitRecord(std::string_view line, char sep, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, wasQuoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && trim(cur).empty()) {
      quoted = wasQuoted = true;
      cur.clear();
    } else if (c == sep) {
      out.push_back(wasQuoted ? cur : std::string(trim(cur)));
      cur.clear();
      wasQuoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError(where + ": unterminated quoted field");
  out.push_back(wasQuoted ? cur : std::string(trim(cur)));
  return out;
}

inline char separatorFor(TableFormat fmt, const std::string& path) {
  if (fmt == TableFormat::Csv) return ',';
  if (fmt == TableFormat::Tsv) return '\t';
  auto ends = [&](std::string_view ext) {
    return path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0;
  };
  return ends(".tsv") || ends(".txt") || ends(".tab") ? '\t' : ',';
}

}  // namespace detail

/// Parses delimited text. Blank lines are skipped; every record must match the header width.
inline Table parseTable(std::istream& in, char sep, const std::string& source = "<input>") {
  Table t;
  t.source = source;
  std::string line;
  std::size_t lineNo = 0;
  bool haveHeader = false;
  while (std::getline(in, line)) {
    ++lineNo;
    if (lineNo == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineNo);
    auto rec = detail::splitRecord(line, sep, where);
    if (!haveHeader) {
      t.header = std::move(rec);
      haveHeader = true;
      continue;
    }
    if (rec.size() != t.header.size())
      throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(rec.size()));
    t.rows.push_back(std::move(rec));
    t.lines.push_back(lineNo);
  }
  if (!haveHeader) throw DataError(source + ": empty input");
  return t;
}

inline Table readTable(const std::string& path, TableFormat fmt = TableFormat::Auto) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parseTable(in, detail::separatorFor(fmt, path), path);
}

/// True for an empty field or a missing-value token (NA, NaN, null; any case).
inline bool isMissingToken(std::string_view s) {
  s = detail::trim(s);
  if (s.empty()) return true;
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "na" || lower == "nan" || lower == "null";
}

/// Locale-independent decimal parse; nullopt when the text is not a complete number.
inline std::optional<double> parseNumber(std::string_view s) {
  s = detail::trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

struct LoadOptions {
  TableFormat format = TableFormat::Auto;
  /// Column holding the 0/1 response; empty means no response.
  std::string responseColumn;
};

/**
 * Numeric dataset from CSV/TSV: header = column names, first column = row id.
 * Empty and NA fields become NaN (missing). Errors carry file, line and column.
 */
inline Dataset datasetFromTable(const Table& t, const std::string& responseColumn = "") {
  if (t.header.size() < 2) throw DataError(t.source + ": need an id column and at least one value column");
  std::unordered_set<std::string> seen;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    if (t.header[c].empty()) throw DataError(t.source + ": empty column header at position " + std::to_string(c + 1));
    if (!seen.insert(t.header[c]).second) throw DataError(t.source + ": duplicate column header '" + t.header[c] + "'");
  }
  std::size_t respCol = 0;
  if (!responseColumn.empty()) {
    for (std::size_t c = 1; c < t.header.size(); ++c)
      if (t.header[c] == responseColumn) respCol = c;
    if (respCol == 0) throw DataError(t.source + ": response column '" + responseColumn + "' not found");
  }
  const auto n = static_cast<Index>(t.rows.size());
  const auto p = static_cast<Index>(t.header.size() - 1 - (respCol ? 1 : 0));
  Dataset d;
  d.values.resize(n, p);
  if (respCol) d.response = Eigen::VectorXd(n);
  for (std::size_t c = 1; c < t.header.size(); ++c)
    if (c != respCol) d.colNames.push_back(t.header[c]);
  std::unordered_set<std::string> ids;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& rec = t.rows[r];
    if (rec[0].empty()) throw DataError(t.where(r, 0) + ": empty row id");
    if (!ids.insert(rec[0]).second) throw DataError(t.where(r, 0) + ": duplicate row id '" + rec[0] + "'");
    d.rowIds.push_back(rec[0]);
    Index j = 0;
    for (std::size_t c = 1; c < rec.size(); ++c) {
      const auto i = static_cast<Index>(r);
      if (c == respCol) {
        auto v = parseNumber(rec[c]);
        if (!v || (*v != 0.0 && *v != 1.0))
          throw DataError(t.where(r, c) + ": response must be 0 or 1, found '" + rec[c] + "'");
        (*d.response)(i) = *v;
        continue;
      }
      if (isMissingToken(rec[c])) {
        d.values(i, j++) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      auto v = parseNumber(rec[c]);
      if (!v) throw DataError(t.where(r, c) + ": not a number: '" + rec[c] + "'");
      d.values(i, j++) = *v;
    }
  }
  d.validate();
  return d;
}

inline Dataset loadDataset(const std::string& path, const LoadOptions& opt = {}) {
  return datasetFromTable(readTable(path, opt.format), opt.responseColumn);
}

/// Writes id, optional response column, then predictors; missing cells as empty fields.
inline void writeDataset(std::ostream& os, const Dataset& d, const std::string& responseName = "y") {
  os << "id";
  if (d.response) os << ',' << csvField(responseName);
  for (const auto& c : d.colNames) os << ',' << csvField(c);
  os << '\n';
  for (Index i = 0; i < d.rows(); ++i) {
    os << csvField(d.rowIds[static_cast<std::size_t>(i)]);
    if (d.response) os << ',' << formatDouble((*d.response)(i));
    for (Index j = 0; j < d.cols(); ++j) {
      const double v = d.values(i, j);
      os << ',';
      if (!std::isnan(v)) os << formatDouble(v);
    }
    os << '\n';
  }
}

/// Ground truth of a synthetic instance; indices are 0-based and refer to dataset rows/columns.
inline nlohmann::ordered_json groundTruthJson(const SyntheticData& sd) {
  const auto& gt = sd.truth;
  nlohmann::ordered_json j;
  j["intercept"] = gt.intercept;
  j["beta"] = std::vector<double>(gt.beta.data(), gt.beta.data() + gt.beta.size());
  j["support"] = gt.support;
  j["flipped_rows"] = gt.flippedRows;
  j["leverage_rows"] = gt.leverageRows;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : gt.cellOutliers) cells.push_back({{"row", c.row}, {"col", c.col}, {"shift", c.shift}});
  j["cell_outliers"] = cells;
  j["y_clean"] = std::vector<double>(gt.yClean.data(), gt.yClean.data() + gt.yClean.size());
  return j;
}

}  // namespace rslogit
