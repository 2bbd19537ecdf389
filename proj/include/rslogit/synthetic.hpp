#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rslogit/core.hpp"
#include "rslogit/random.hpp"

namespace rslogit {

struct SyntheticConfig {
  Index n = 200;
  Index p = 10;
  /// Size of the true support.
  Index sparsity = 3;
  /// Magnitude of every nonzero true coefficient (signs are random).
  double signal = 1.0;
  /// Target fraction of label-1 rows; the intercept is solved to match it.
  double classBalance = 0.5;
  double labelFlipRate = 0.0;
  double leverageRate = 0.0;
  /// Shift, in units of the column SD, applied to support columns of leverage rows.
  double leverageSize = 3.0;
  double cellOutlierRate = 0.0;
  double cellOutlierSize = 6.0;
  /// Columns are grouped in consecutive blocks with this within-block correlation.
  Index blockSize = 5;
  double blockRho = 0.0;
  /// When set, labels are drawn first and class-1 rows use this block
  /// correlation instead of blockRho (two-regime design).
  std::optional<double> class1BlockRho;
  std::uint64_t seed = 1;

  void validate() const {
    auto rate = [](double r, const char* what) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1)");
    };
    rate(labelFlipRate, "labelFlipRate");
    rate(leverageRate, "leverageRate");
    rate(cellOutlierRate, "cellOutlierRate");
    if (n < 2 || p < 1) throw ConfigError("synthetic data needs n >= 2 and p >= 1");
    if (sparsity < 0 || sparsity > p) throw ConfigError("sparsity must lie in [0, p]");
    if (!(classBalance > 0.0 && classBalance < 1.0)) throw ConfigError("classBalance must lie in (0, 1)");
    if (blockSize < 1) throw ConfigError("blockSize must be >= 1");
    auto rho = [](double r) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("block correlation must lie in [0, 1)");
    };
    rho(blockRho);
    if (class1BlockRho) rho(*class1BlockRho);
  }
};

struct CellOutlier {
  Index row = 0;
  Index col = 0;
  double shift = 0.0;
};

struct GroundTruth {
  double intercept = 0.0;
  Eigen::VectorXd beta;
  std::vector<Index> support;
  std::vector<Index> flippedRows;
  std::vector<Index> leverageRows;
  std::vector<CellOutlier> cellOutliers;
  /// Labels before flipping.
  Eigen::VectorXd yClean;
};

struct SyntheticData {
  Dataset data;
  GroundTruth truth;
};

namespace detail {

enum SyntheticStream : std::uint64_t { kSupport = 1, kDesign = 2, kLabels = 3, kLeverage = 4, kFlips = 5, kCells = 6 };

inline Index roundCount(double rate, Index total) {
  return static_cast<Index>(std::llround(rate * static_cast<double>(total)));
}

inline void fillRow(Rng& rng, Eigen::MatrixXd& x, Index i, Index blockSize, double rho) {
  const Index p = x.cols();
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  for (Index start = 0; start < p; start += blockSize) {
    const double f = rng.normal();
    for (Index j = start; j < std::min(p, start + blockSize); ++j) x(i, j) = a * f + b * rng.normal();
  }
}

}  // namespace detail

/**
 * Seeded synthetic logistic data with recorded contamination. Each stage
 * (support, design, labels, leverage, flips, cell outliers) draws from its
 * own child stream, so the clean part of an instance does not depend on the
 * contamination rates.
 *
 * Leverage rows receive a shift of +-leverageSize along sign(beta*) on the
 * support before labels are drawn, so their true labels are near certain.
 * Label flips go to leverage rows first, then to uniformly chosen others.
 */
inline SyntheticData generateSynthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n, p = cfg.p;
  SyntheticData out;
  GroundTruth& gt = out.truth;

  Rng supportRng(deriveSeed(cfg.seed, detail::kSupport));
  gt.support = supportRng.sample(detail::iota(p), static_cast<std::size_t>(cfg.sparsity));
  std::sort(gt.support.begin(), gt.support.end());
  gt.beta = Eigen::VectorXd::Zero(p);
  for (Index j : gt.support) gt.beta(j) = cfg.signal * supportRng.sign();

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  Rng designRng(deriveSeed(cfg.seed, detail::kDesign));
  Rng labelRng(deriveSeed(cfg.seed, detail::kLabels));

  if (cfg.class1BlockRho) {
    for (Index i = 0; i < n; ++i) {
      y(i) = labelRng.uniform() < cfg.classBalance ? 1.0 : 0.0;
      detail::fillRow(designRng, x, i, cfg.blockSize, y(i) == 1.0 ? *cfg.class1BlockRho : cfg.blockRho);
      if (y(i) == 1.0) x.row(i) += gt.beta.transpose();
    }
    gt.intercept = 0.0;
  } else {
    for (Index i = 0; i < n; ++i) detail::fillRow(designRng, x, i, cfg.blockSize, cfg.blockRho);
  }

  Rng leverageRng(deriveSeed(cfg.seed, detail::kLeverage));
  gt.leverageRows = leverageRng.sample(detail::iota(n), static_cast<std::size_t>(detail::roundCount(cfg.leverageRate, n)));
  for (Index i : gt.leverageRows) {
    const double dir = leverageRng.sign();
    if (gt.support.empty()) {
      x.row(i).array() += dir * cfg.leverageSize;
    } else {
      for (Index j : gt.support) x(i, j) += dir * cfg.leverageSize * (gt.beta(j) > 0.0 ? 1.0 : -1.0);
    }
  }
  std::sort(gt.leverageRows.begin(), gt.leverageRows.end());

  if (!cfg.class1BlockRho) {
    const Eigen::VectorXd slope = x * gt.beta;
    auto meanProb = [&](double b0) {
      double s = 0.0;
      for (Index i = 0; i < n; ++i) s += sigmoid(b0 + slope(i));
      return s / static_cast<double>(n);
    };
    double lo = -50.0, hi = 50.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (meanProb(mid) < cfg.classBalance ? lo : hi) = mid;
    }
    gt.intercept = 0.5 * (lo + hi);
    for (Index i = 0; i < n; ++i) y(i) = labelRng.uniform() < sigmoid(gt.intercept + slope(i)) ? 1.0 : 0.0;
  }
  gt.yClean = y;

  Rng flipRng(deriveSeed(cfg.seed, detail::kFlips));
  const Index nFlips = detail::roundCount(cfg.labelFlipRate, n);
  std::vector<Index> lev = gt.leverageRows;
  flipRng.shuffle(lev);
  std::vector<Index> others;
  for (Index i = 0; i < n; ++i)
    if (!std::binary_search(gt.leverageRows.begin(), gt.leverageRows.end(), i)) others.push_back(i);
  flipRng.shuffle(others);
  for (Index k = 0; k < nFlips; ++k) {
    const Index i = k < static_cast<Index>(lev.size()) ? lev[static_cast<std::size_t>(k)]
                                                       : others[static_cast<std::size_t>(k - static_cast<Index>(lev.size()))];
    gt.flippedRows.push_back(i);
    y(i) = 1.0 - y(i);
  }
  std::sort(gt.flippedRows.begin(), gt.flippedRows.end());

  Rng cellRng(deriveSeed(cfg.seed, detail::kCells));
  const Index nCells = detail::roundCount(cfg.cellOutlierRate, n * p);
  auto cells = cellRng.sample(detail::iota(n * p), static_cast<std::size_t>(nCells));
  std::sort(cells.begin(), cells.end());
  for (Index c : cells) {
    CellOutlier co{c / p, c % p, cellRng.sign() * cfg.cellOutlierSize};
    x(co.row, co.col) += co.shift;
    gt.cellOutliers.push_back(co);
  }

  out.data.values = std::move(x);
  out.data.response = std::move(y);
  for (Index j = 0; j < p; ++j) out.data.colNames.push_back("x" + std::to_string(j + 1));
  for (Index i = 0; i < n; ++i) out.data.rowIds.push_back("r" + std::to_string(i + 1));
  return out;
}

}  // namespace rslogit
