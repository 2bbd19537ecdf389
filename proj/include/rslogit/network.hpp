#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rslogit/core.hpp"
#include "rslogit/format.hpp"
#include "rslogit/robust_stats.hpp"

namespace rslogit {

enum class ClassFilter { Class0, Class1, All };

inline const char* classFilterName(ClassFilter f) {
  switch (f) {
    case ClassFilter::Class0: return "0";
    case ClassFilter::Class1: return "1";
    default: return "all";
  }
}

struct NetworkEdge {
  std::string source;
  std::string target;
  double rho = 0.0;
};

struct GeneNetwork {
  std::vector<std::string> nodes;
  /// Undirected; each pair appears once with source before target in node order.
  std::vector<NetworkEdge> edges;
  double threshold = 0.6;
  ClassFilter classFilter = ClassFilter::All;
  Index rowsUsed = 0;

  bool hasEdge(const std::string& a, const std::string& b) const {
    for (const auto& e : edges)
      if ((e.source == a && e.target == b) || (e.source == b && e.target == a)) return true;
    return false;
  }
};

/**
 * Pearson correlations among `genes` (all columns when empty) over the rows
 * of the selected class; an edge joins every pair with |rho| > threshold.
 */
inline GeneNetwork correlationNetwork(const Dataset& data, const std::vector<std::string>& genes,
                                      ClassFilter filter, double threshold = 0.6) {
  data.validate();
  if (!(threshold >= 0.0 && threshold < 1.0)) throw ConfigError("network threshold must lie in [0, 1)");
  std::vector<Index> cols;
  if (genes.empty()) {
    for (Index j = 0; j < data.cols(); ++j) cols.push_back(j);
  } else {
    for (const auto& g : genes) cols.push_back(data.columnIndex(g));
  }
  std::vector<Index> rows;
  for (Index i = 0; i < data.rows(); ++i) {
    if (filter == ClassFilter::All || data.y()(i) == (filter == ClassFilter::Class1 ? 1.0 : 0.0)) rows.push_back(i);
  }
  if (rows.size() < 3) throw DataError("correlation network needs at least 3 rows after class filtering");

  GeneNetwork net;
  net.threshold = threshold;
  net.classFilter = filter;
  net.rowsUsed = static_cast<Index>(rows.size());
  std::vector<std::vector<double>> x(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const Index j = cols[c];
    net.nodes.push_back(data.colNames[static_cast<std::size_t>(j)]);
    for (Index i : rows) {
      const double v = data.values(i, j);
      if (!std::isfinite(v))
        throw DataError("missing value in column '" + net.nodes.back() + "', row '" +
                        data.rowIds[static_cast<std::size_t>(i)] + "'");
      x[c].push_back(v);
    }
  }
  for (std::size_t a = 0; a < cols.size(); ++a) {
    for (std::size_t b = a + 1; b < cols.size(); ++b) {
      const double r = pearsonCorrelation(x[a], x[b]);
      if (std::abs(r) > threshold) net.edges.push_back({net.nodes[a], net.nodes[b], r});
    }
  }
  return net;
}

inline constexpr const char* kEdgePositive = "#1a9641";
inline constexpr const char* kEdgeNegative = "#d7191c";

/// Edge width 1 + 4 (|rho| - t) / (1 - t): 1 at the threshold, 5 at |rho| = 1.
inline double edgePenwidth(double rho, double threshold) {
  return 1.0 + 4.0 * (std::abs(rho) - threshold) / (1.0 - threshold);
}

/// Graphviz DOT; green for positive, red for negative correlation, width by strength.
inline void writeNetworkDot(std::ostream& os, const GeneNetwork& net) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  os << "graph network {\n";
  os << "  graph [label=" << quote(std::string("class ") + classFilterName(net.classFilter) + ", |rho| > " +
                                   formatDouble(net.threshold))
     << "];\n";
  os << "  node [shape=ellipse];\n";
  for (const auto& n : net.nodes) os << "  " << quote(n) << ";\n";
  for (const auto& e : net.edges) {
    os << "  " << quote(e.source) << " -- " << quote(e.target) << " [color=\""
       << (e.rho >= 0.0 ? kEdgePositive : kEdgeNegative) << "\", penwidth="
       << formatDouble(std::round(edgePenwidth(e.rho, net.threshold) * 1000.0) / 1000.0)
       << ", rho=" << formatDouble(e.rho) << "];\n";
  }
  os << "}\n";
}

inline nlohmann::ordered_json networkJson(const GeneNetwork& net) {
  nlohmann::ordered_json j;
  j["class_filter"] = classFilterName(net.classFilter);
  j["threshold"] = net.threshold;
  j["rows_used"] = net.rowsUsed;
  j["nodes"] = net.nodes;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : net.edges) {
    edges.push_back({{"source", e.source},
                     {"target", e.target},
                     {"rho", e.rho},
                     {"sign", e.rho >= 0.0 ? "positive" : "negative"},
                     {"penwidth", edgePenwidth(e.rho, net.threshold)}});
  }
  j["edges"] = edges;
  return j;
}

}  // namespace rslogit
