#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rslogit/core.hpp"
#include "rslogit/format.hpp"
#include "rslogit/parallel.hpp"
#include "rslogit/quantiles.hpp"
#include "rslogit/robust_stats.hpp"

namespace rslogit {

struct DdcConfig {
  /// Minimum |robust correlation| for a column to predict another.
  double corrThreshold = 0.5;
  double flagQuantile = 0.99;
  Index maxPredictors = 10;
  double minMad = 1e-8;
  /// Pairs with either |z| above this are dropped before correlating.
  double corrTrim = 3.0;
  /// Predictor cells with |z| above this are skipped like missing cells.
  /// Infinity disables the skip.
  double predictorTrim = 3.0;
  Index minPairs = 10;
  unsigned threads = 1;

  void validate() const {
    if (!(corrThreshold > 0.0 && corrThreshold < 1.0)) throw ConfigError("corrThreshold must lie in (0, 1)");
    if (!(flagQuantile > 0.5 && flagQuantile < 1.0)) throw ConfigError("flagQuantile must lie in (0.5, 1)");
    if (maxPredictors < 0) throw ConfigError("maxPredictors must be >= 0");
    if (!(minMad > 0.0)) throw ConfigError("minMad must be > 0");
    if (!(corrTrim > 0.0)) throw ConfigError("corrTrim must be > 0");
    if (!(predictorTrim > 0.0)) throw ConfigError("predictorTrim must be > 0");
    if (minPairs < 3) throw ConfigError("minPairs must be >= 3");
  }

  /// sqrt of the chi-square(1) quantile at flagQuantile.
  double cutoff() const { return sqrtChiSquare1Quantile(flagQuantile); }
};

enum class CellFlag : unsigned char { Normal, High, Low, Missing };

inline const char* flagName(CellFlag f) {
  switch (f) {
    case CellFlag::High: return "high";
    case CellFlag::Low: return "low";
    case CellFlag::Missing: return "missing";
    default: return "normal";
  }
}

struct CellMap {
  Eigen::Matrix<CellFlag, Eigen::Dynamic, Eigen::Dynamic> flags;
  Eigen::MatrixXd standardizedResiduals;
  Eigen::MatrixXd predicted;
  Eigen::VectorXd rowScores;
  double cutoff = 0.0;
  std::vector<std::string> rowIds;
  std::vector<std::string> colNames;

  Index rows() const { return flags.rows(); }
  Index cols() const { return flags.cols(); }
  Index count(CellFlag f) const { return static_cast<Index>((flags.array() == f).count()); }
};

struct RobustColumn {
  double center = 0.0;
  double scale = 0.0;
  Eigen::VectorXd z;
};

/// Median/MAD standardization; NaN cells stay NaN.
inline RobustColumn robustStandardize(const Eigen::VectorXd& column, double minMad = 1e-8) {
  std::vector<double> v(column.data(), column.data() + column.size());
  const auto finite = std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  if (finite == 0) throw DataError("column has no finite values");
  if (finite < 3) throw DataError("robust standardization needs at least 3 finite values");
  RobustColumn out;
  out.center = median(v);
  out.scale = std::max(madScale(v, out.center), minMad);
  out.z = (column.array() - out.center) / out.scale;
  for (Index i = 0; i < column.size(); ++i)
    if (!std::isfinite(column(i))) out.z(i) = std::numeric_limits<double>::quiet_NaN();
  return out;
}

/// Pearson correlation over jointly finite pairs with both |z| <= trim; 0 when fewer than minPairs remain.
inline double robustBivariateCorr(const Eigen::VectorXd& zj, const Eigen::VectorXd& zk, double trim = 3.0,
                                  Index minPairs = 10) {
  if (zj.size() != zk.size()) throw DataError("correlation inputs differ in length");
  std::vector<double> a, b;
  a.reserve(static_cast<std::size_t>(zj.size()));
  b.reserve(static_cast<std::size_t>(zj.size()));
  for (Index i = 0; i < zj.size(); ++i) {
    const double x = zj(i), y = zk(i);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if (std::abs(x) > trim || std::abs(y) > trim) continue;
    a.push_back(x);
    b.push_back(y);
  }
  if (static_cast<Index>(a.size()) < minPairs) return 0.0;
  return pearsonCorrelation(a, b);
}

/// Column-wise robust z-scores of a matrix.
inline Eigen::MatrixXd robustStandardizeMatrix(const Eigen::MatrixXd& x, const DdcConfig& cfg = {}) {
  Eigen::MatrixXd z(x.rows(), x.cols());
  parallelFor(static_cast<std::size_t>(x.cols()), cfg.threads, [&](std::size_t j) {
    z.col(static_cast<Index>(j)) = robustStandardize(x.col(static_cast<Index>(j)), cfg.minMad).z;
  });
  return z;
}

/// Symmetric matrix of robust correlations with a unit diagonal.
inline Eigen::MatrixXd robustCorrelationMatrix(const Eigen::MatrixXd& z, const DdcConfig& cfg = {}) {
  const Index p = z.cols();
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(p, p);
  parallelFor(static_cast<std::size_t>(p), cfg.threads, [&](std::size_t jj) {
    const auto j = static_cast<Index>(jj);
    for (Index k = j + 1; k < p; ++k) c(j, k) = robustBivariateCorr(z.col(j), z.col(k), cfg.corrTrim, cfg.minPairs);
  });
  for (Index j = 0; j < p; ++j)
    for (Index k = j + 1; k < p; ++k) c(k, j) = c(j, k);
  return c;
}

/**
 * Predicted z-score of every cell from the same row's cells in correlated
 * columns: the |corr|-weighted mean of corr * z over up to maxPredictors
 * columns with |corr| >= corrThreshold (strongest first, ties to the lower
 * column index). Falls back to 0 when no predictor value is usable.
 */
inline Eigen::MatrixXd predictCells(const Eigen::MatrixXd& z, const DdcConfig& cfg = {}) {
  cfg.validate();
  const Index n = z.rows(), p = z.cols();
  const Eigen::MatrixXd corr = robustCorrelationMatrix(z, cfg);
  Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(n, p);
  parallelFor(static_cast<std::size_t>(p), cfg.threads, [&](std::size_t jj) {
    const auto j = static_cast<Index>(jj);
    std::vector<Index> ks;
    for (Index k = 0; k < p; ++k)
      if (k != j && std::abs(corr(j, k)) >= cfg.corrThreshold) ks.push_back(k);
    std::stable_sort(ks.begin(), ks.end(),
                     [&](Index a, Index b) { return std::abs(corr(j, a)) > std::abs(corr(j, b)); });
    if (static_cast<Index>(ks.size()) > cfg.maxPredictors) ks.resize(static_cast<std::size_t>(cfg.maxPredictors));
    if (ks.empty()) return;
    for (Index i = 0; i < n; ++i) {
      double num = 0.0, den = 0.0;
      for (Index k : ks) {
        const double v = z(i, k);
        if (!std::isfinite(v) || std::abs(v) > cfg.predictorTrim) continue;
        const double c = corr(j, k);
        num += std::abs(c) * c * v;
        den += std::abs(c);
      }
      if (den > 0.0) pred(i, j) = num / den;
    }
  });
  return pred;
}

/**
 * Residuals (z - predicted) / s_j with s_j the MAD scale of column j's
 * residuals, flagged against the chi-square(1) cutoff. Missing cells are
 * never flagged.
 */
inline CellMap flagCells(const Eigen::MatrixXd& z, const Eigen::MatrixXd& predicted, const DdcConfig& cfg = {}) {
  cfg.validate();
  if (z.rows() != predicted.rows() || z.cols() != predicted.cols())
    throw DataError("standardized and predicted matrices differ in shape");
  const Index n = z.rows(), p = z.cols();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CellMap map;
  map.cutoff = cfg.cutoff();
  map.predicted = predicted;
  map.standardizedResiduals.resize(n, p);
  map.flags.resize(n, p);
  for (Index j = 0; j < p; ++j) {
    std::vector<double> raw(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) raw[static_cast<std::size_t>(i)] = z(i, j) - predicted(i, j);
    const double center = median(raw);
    const double s = std::isfinite(center) ? std::max(madScale(raw, center), cfg.minMad) : cfg.minMad;
    for (Index i = 0; i < n; ++i) {
      const double r = raw[static_cast<std::size_t>(i)];
      if (!std::isfinite(r)) {
        map.standardizedResiduals(i, j) = nan;
        map.flags(i, j) = CellFlag::Missing;
        continue;
      }
      const double rs = r / s;
      map.standardizedResiduals(i, j) = rs;
      map.flags(i, j) = rs > map.cutoff ? CellFlag::High : rs < -map.cutoff ? CellFlag::Low : CellFlag::Normal;
    }
  }
  map.rowScores.resize(n);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    Index m = 0;
    for (Index j = 0; j < p; ++j) {
      const double r = map.standardizedResiduals(i, j);
      if (std::isfinite(r)) {
        s += r * r;
        ++m;
      }
    }
    map.rowScores(i) = m ? s / static_cast<double>(m) : nan;
  }
  return map;
}

/// Standardize, predict and flag. Missing (NaN) cells are allowed.
inline CellMap detectDeviatingCells(const Dataset& data, const DdcConfig& cfg = {}) {
  cfg.validate();
  data.validate();
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j)
      if (std::isinf(data.values(i, j)))
        throw DataError("infinite value at row '" + data.rowIds[static_cast<std::size_t>(i)] + "', column '" +
                        data.colNames[static_cast<std::size_t>(j)] + "'");
  const Eigen::MatrixXd z = robustStandardizeMatrix(data.values, cfg);
  CellMap map = flagCells(z, predictCells(z, cfg), cfg);
  map.rowIds = data.rowIds;
  map.colNames = data.colNames;
  return map;
}

/// CSV with one line per cell: row,col,flag,residual.
inline void writeCellMapCsv(std::ostream& os, const CellMap& map) {
  os << "row,col,flag,residual\n";
  for (Index i = 0; i < map.rows(); ++i)
    for (Index j = 0; j < map.cols(); ++j)
      os << csvField(map.rowIds[static_cast<std::size_t>(i)]) << ',' << csvField(map.colNames[static_cast<std::size_t>(j)])
         << ',' << flagName(map.flags(i, j)) << ',' << formatDouble(map.standardizedResiduals(i, j)) << '\n';
}

enum class RenderFormat { Svg, Txt };

inline constexpr const char* kColorHigh = "#d62728";
inline constexpr const char* kColorLow = "#1f4e9c";
inline constexpr const char* kColorNormal = "#ffe866";
inline constexpr const char* kColorMissing = "#ffffff";

namespace detail {

inline std::string xmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline char flagChar(CellFlag f) {
  switch (f) {
    case CellFlag::High: return '+';
    case CellFlag::Low: return '-';
    case CellFlag::Missing: return '?';
    default: return '.';
  }
}

inline const char* flagColor(CellFlag f) {
  switch (f) {
    case CellFlag::High: return kColorHigh;
    case CellFlag::Low: return kColorLow;
    case CellFlag::Missing: return kColorMissing;
    default: return kColorNormal;
  }
}

}  // namespace detail

/**
 * Grid rendering of selected rows and columns in the order given. SVG cells
 * are red (high), blue (low), yellow (normal) or white (missing); TXT uses
 * '+', '-', '.', '?'. `rowGroups`, when non-empty, holds one label per
 * selected row; consecutive equal labels form a band.
 */
inline std::string renderCellMap(const CellMap& map, const std::vector<Index>& rowSubset,
                                 const std::vector<Index>& colOrder, RenderFormat format,
                                 const std::vector<std::string>& rowGroups = {}) {
  if (rowSubset.empty() || colOrder.empty()) throw ConfigError("cell map selection is empty");
  for (Index i : rowSubset)
    if (i < 0 || i >= map.rows()) throw ConfigError("row index " + std::to_string(i) + " out of range");
  for (Index j : colOrder)
    if (j < 0 || j >= map.cols()) throw ConfigError("column index " + std::to_string(j) + " out of range");
  if (!rowGroups.empty() && rowGroups.size() != rowSubset.size())
    throw ConfigError("row group count does not match selected rows");
  auto rowName = [&](Index i) { return map.rowIds.empty() ? "row" + std::to_string(i + 1) : map.rowIds[static_cast<std::size_t>(i)]; };
  auto colName = [&](Index j) { return map.colNames.empty() ? "col" + std::to_string(j + 1) : map.colNames[static_cast<std::size_t>(j)]; };

  std::string out;
  if (format == RenderFormat::Txt) {
    out += "#";
    for (Index j : colOrder) out += " " + colName(j);
    out += "\n";
    for (std::size_t r = 0; r < rowSubset.size(); ++r) {
      const Index i = rowSubset[r];
      std::string line;
      for (Index j : colOrder) line += detail::flagChar(map.flags(i, j));
      out += line + " " + rowName(i);
      if (!rowGroups.empty()) out += " [" + rowGroups[r] + "]";
      out += "\n";
    }
    return out;
  }

  constexpr int cell = 12;
  std::size_t maxRowLabel = 0, maxColLabel = 0, maxGroup = 0;
  for (Index i : rowSubset) maxRowLabel = std::max(maxRowLabel, rowName(i).size());
  for (Index j : colOrder) maxColLabel = std::max(maxColLabel, colName(j).size());
  for (const auto& g : rowGroups) maxGroup = std::max(maxGroup, g.size());
  const int groupW = rowGroups.empty() ? 0 : static_cast<int>(maxGroup) * 7 + 10;
  const int left = groupW + static_cast<int>(maxRowLabel) * 7 + 8;
  const int top = static_cast<int>(maxColLabel) * 7 + 8;
  const int width = left + cell * static_cast<int>(colOrder.size()) + 4;
  const int height = top + cell * static_cast<int>(rowSubset.size()) + 4;
  auto num = [](int v) { return std::to_string(v); };

  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" font-family=\"monospace\" font-size=\"10\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" fill=\"#ffffff\"/>\n";
  for (std::size_t c = 0; c < colOrder.size(); ++c) {
    const int x = left + cell * static_cast<int>(c) + cell / 2 + 3;
    out += "<text x=\"" + num(x) + "\" y=\"" + num(top - 4) + "\" transform=\"rotate(-90 " + num(x) + " " +
           num(top - 4) + ")\">" + detail::xmlEscape(colName(colOrder[c])) + "</text>\n";
  }
  for (std::size_t r = 0; r < rowSubset.size(); ++r) {
    const Index i = rowSubset[r];
    const int y = top + cell * static_cast<int>(r);
    if (!rowGroups.empty() && (r == 0 || rowGroups[r] != rowGroups[r - 1])) {
      out += "<text x=\"2\" y=\"" + num(y + cell - 2) + "\" font-weight=\"bold\">" +
             detail::xmlEscape(rowGroups[r]) + "</text>\n";
      if (r > 0)
        out += "<line x1=\"0\" y1=\"" + num(y) + "\" x2=\"" + num(width) + "\" y2=\"" + num(y) +
               "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    }
    out += "<text x=\"" + num(groupW + 2) + "\" y=\"" + num(y + cell - 2) + "\">" + detail::xmlEscape(rowName(i)) +
           "</text>\n";
    for (std::size_t c = 0; c < colOrder.size(); ++c) {
      const int x = left + cell * static_cast<int>(c);
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
             "\" fill=\"" + detail::flagColor(map.flags(i, colOrder[c])) + "\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace rslogit
