#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "rslogit/core.hpp"
#include "rslogit/enet.hpp"
#include "rslogit/format.hpp"
#include "rslogit/lts.hpp"
#include "rslogit/parallel.hpp"
#include "rslogit/random.hpp"
#include "rslogit/robust_stats.hpp"

namespace rslogit {

enum class Estimator { Classical, Robust };

struct CvConfig {
  int kFolds = 5;
  int nRepeats = 10;
  std::vector<double> alphaGrid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int nLambda = 40;
  double lambdaRatio = 0.01;
  /// Explicit lambda values used for every alpha instead of the geometric grid.
  std::vector<double> lambdaValues;
  /// Empty means all ones.
  Eigen::VectorXd penaltyFactors;
  bool stratified = true;
  std::uint64_t rngSeed = 0;
  Estimator estimator = Estimator::Classical;
  unsigned threads = 1;

  void validate() const {
    if (kFolds < 2) throw ConfigError("kFolds must be >= 2");
    if (nRepeats < 1) throw ConfigError("nRepeats must be >= 1");
    if (alphaGrid.empty()) throw ConfigError("alpha grid is empty");
    for (double a : alphaGrid)
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha grid values must lie in [0, 1]");
    if (lambdaValues.empty()) {
      if (nLambda < 2) throw ConfigError("nLambda must be >= 2");
      if (!(lambdaRatio > 0.0 && lambdaRatio < 1.0)) throw ConfigError("lambda ratio must lie in (0, 1)");
    }
    for (double l : lambdaValues)
      if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda values must be finite and >= 0");
  }
};

struct CvPoint {
  double alpha = 0.0;
  double lambda = 0.0;
  /// Mean over repeats and folds of the held-out mean deviance.
  double meanDeviance = 0.0;
  /// Sample SD of the individual fold scores.
  double sdDeviance = 0.0;
  /// Nonzero slopes of the fit on the full data at this point (-1 if that fit failed).
  Index nNonzero = 0;
  int foldsUsed = 0;
};

struct CvResult {
  std::vector<CvPoint> grid;
  std::size_t bestIndex = 0;
  /// perRepeatScores[r][g]: mean fold score of repeat r at grid point g (NaN if every fold failed).
  std::vector<std::vector<double>> perRepeatScores;
  /// Fold assignment (0-based) per repeat.
  std::vector<std::vector<int>> folds;
  /// Grid points for which every fold failed; not part of `grid`.
  std::vector<CvPoint> excluded;

  const CvPoint& best() const { return grid.at(bestIndex); }
};

/**
 * Fold labels in [0, k). Rows are shuffled with `seed` and dealt round-robin;
 * in the stratified case each class is dealt separately, the second class
 * continuing where the first stopped, so both per-class and overall fold
 * sizes differ by at most one.
 */
inline std::vector<int> makeFolds(Index n, const Eigen::VectorXd& y, int k, bool stratified, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kFolds must be >= 2");
  if (k > n) throw ConfigError("more folds than observations");
  Rng rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<Index>> groups;
  if (stratified) {
    if (y.size() != n) throw DataError("response length does not match n");
    groups.resize(2);
    for (Index i = 0; i < n; ++i) groups[y(i) == 1.0 ? 1 : 0].push_back(i);
    for (const auto& g : groups)
      if (static_cast<Index>(g.size()) < k) throw DataError("a class has fewer observations than folds");
  } else {
    groups.emplace_back(detail::iota(n));
  }
  std::size_t next = 0;
  for (auto& g : groups) {
    rng.shuffle(g);
    for (Index i : g) {
      fold[static_cast<std::size_t>(i)] = static_cast<int>(next % static_cast<std::size_t>(k));
      ++next;
    }
  }
  return fold;
}

/// Index of the lowest mean deviance; ties go to larger lambda, then larger alpha.
inline std::size_t selectBest(const std::vector<CvPoint>& grid) {
  if (grid.empty()) throw NumericalError("cross-validation produced no usable grid point");
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const auto& a = grid[g];
    const auto& b = grid[best];
    const double tol = 1e-12 * std::max(1.0, std::abs(b.meanDeviance));
    if (a.meanDeviance < b.meanDeviance - tol) {
      best = g;
    } else if (std::abs(a.meanDeviance - b.meanDeviance) <= tol) {
      if (a.lambda > b.lambda || (a.lambda == b.lambda && a.alpha > b.alpha)) best = g;
    }
  }
  return best;
}

namespace detail {

enum CvStream : std::uint64_t { kFoldStream = 0x10000, kLtsStream = 0x20000 };

/// Held-out score: mean deviance, optionally over the smallest `keepFraction` share only.
inline double heldOutScore(const Dataset& test, const Coefficients& coefs, std::optional<double> keepFraction) {
  Eigen::VectorXd d = perObservationDeviance(test, coefs);
  std::vector<double> v(d.data(), d.data() + d.size());
  if (keepFraction) {
    std::sort(v.begin(), v.end());
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(*keepFraction * static_cast<double>(v.size()) + 1e-9)));
    v.resize(std::min(keep, v.size()));
  }
  return mean(v);
}

/// Per-lambda coefficients along a path for one training set (nullopt = failed fit).
inline std::vector<std::optional<Coefficients>> trainPath(const Dataset& train, Estimator est, double alpha,
                                                          const Eigen::VectorXd& pf,
                                                          const std::vector<double>& lambdas,
                                                          const LtsConfig& lts, const SolverConfig& solver) {
  std::vector<std::optional<Coefficients>> out(lambdas.size());
  if (est == Estimator::Classical) {
    std::optional<Coefficients> warm;
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      try {
        auto fit = fitEnetLogistic(train, PenaltySpec{alpha, lambdas[l], pf}, solver, warm ? &*warm : nullptr);
        warm = fit.coefs;
        out[l] = std::move(fit.coefs);
      } catch (const Error&) {
      }
    }
    return out;
  }
  std::vector<std::vector<Index>> starts;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    try {
      const PenaltySpec spec{alpha, lambdas[l], pf};
      RobustFitResult fit = starts.empty() ? fitEnetLts(train, spec, lts, solver)
                                           : fitEnetLtsFromSubsets(train, spec, starts, lts, solver);
      starts.clear();
      for (const auto& c : fit.candidates) starts.push_back(c.subset);
      out[l] = std::move(fit.reweightedCoefs);
    } catch (const Error&) {
      starts.clear();
    }
  }
  return out;
}

}  // namespace detail

/**
 * Repeated k-fold cross-validation with caller-supplied fold assignments
 * (one vector of 0-based fold labels per repeat).
 *
 * Lambda grids are computed once per alpha on the full data. Each training
 * set is fitted along the decreasing lambda path with warm starts; for the
 * robust estimator the retained h-subsets of one lambda seed the next, and
 * the largest (1 - hFraction) share of held-out deviances in each fold is
 * trimmed before averaging.
 */
inline CvResult crossValidateWithFolds(const Dataset& data, const CvConfig& cv,
                                       const std::vector<std::vector<int>>& folds, const LtsConfig& lts = {},
                                       const SolverConfig& solver = {}) {
  data.validateForFit();
  cv.validate();
  if (cv.estimator == Estimator::Robust) lts.validate();
  const Index n = data.rows(), p = data.cols();
  const Eigen::VectorXd pf = cv.penaltyFactors.size() ? cv.penaltyFactors : Eigen::VectorXd::Ones(p);
  PenaltySpec{1.0, 0.0, pf}.validate(p);
  for (const auto& f : folds)
    if (static_cast<Index>(f.size()) != n) throw ConfigError("fold assignment length does not match rows");

  SolverConfig gridSolver = solver;
  if (cv.estimator == Estimator::Robust) gridSolver.standardizationMode = StandardizationMode::Robust;

  std::vector<std::vector<double>> lambdas;
  for (double a : cv.alphaGrid) {
    lambdas.push_back(cv.lambdaValues.empty()
                          ? lambdaGrid(data, a, pf, cv.nLambda, cv.lambdaRatio, gridSolver)
                          : cv.lambdaValues);
  }
  const std::size_t nAlpha = cv.alphaGrid.size();
  std::vector<std::size_t> offset(nAlpha + 1, 0);
  for (std::size_t a = 0; a < nAlpha; ++a) offset[a + 1] = offset[a] + lambdas[a].size();
  const std::size_t nGrid = offset.back();

  const std::size_t nRep = folds.size();
  const std::size_t k = static_cast<std::size_t>(cv.kFolds);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  // scores[(r * k + f)][g]
  std::vector<std::vector<double>> scores(nRep * k, std::vector<double>(nGrid, nan));
  std::vector<Index> nonzero(nGrid, -1);

  const std::optional<double> keep =
      cv.estimator == Estimator::Robust ? std::optional<double>(lts.hFraction) : std::nullopt;
  const std::size_t foldJobs = nRep * k * nAlpha;
  parallelFor(foldJobs + nAlpha, cv.threads, [&](std::size_t job) {
    if (job >= foldJobs) {
      const std::size_t a = job - foldJobs;
      LtsConfig l = lts;
      l.rngSeed = deriveSeed(lts.rngSeed, detail::kLtsStream + a);
      l.threads = 1;
      auto coefs = detail::trainPath(data, cv.estimator, cv.alphaGrid[a], pf, lambdas[a], l, solver);
      for (std::size_t g = 0; g < coefs.size(); ++g)
        if (coefs[g]) nonzero[offset[a] + g] = coefs[g]->nonzeroCount();
      return;
    }
    const std::size_t a = job % nAlpha;
    const std::size_t rf = job / nAlpha;
    const std::size_t r = rf / k, f = rf % k;
    std::vector<Index> trainRows, testRows;
    for (Index i = 0; i < n; ++i)
      (folds[r][static_cast<std::size_t>(i)] == static_cast<int>(f) ? testRows : trainRows).push_back(i);
    if (testRows.empty()) return;
    const Dataset train = data.selectRows(trainRows);
    const Dataset test = data.selectRows(testRows);
    LtsConfig l = lts;
    l.rngSeed = deriveSeed(lts.rngSeed, job);
    l.threads = 1;
    auto coefs = detail::trainPath(train, cv.estimator, cv.alphaGrid[a], pf, lambdas[a], l, solver);
    for (std::size_t g = 0; g < coefs.size(); ++g)
      if (coefs[g]) scores[rf][offset[a] + g] = detail::heldOutScore(test, *coefs[g], keep);
  });

  CvResult res;
  res.folds = folds;
  res.perRepeatScores.assign(nRep, std::vector<double>(nGrid, nan));
  for (std::size_t a = 0; a < nAlpha; ++a) {
    for (std::size_t l = 0; l < lambdas[a].size(); ++l) {
      const std::size_t g = offset[a] + l;
      CvPoint pt;
      pt.alpha = cv.alphaGrid[a];
      pt.lambda = lambdas[a][l];
      pt.nNonzero = nonzero[g];
      std::vector<double> all;
      for (std::size_t r = 0; r < nRep; ++r) {
        std::vector<double> rep;
        for (std::size_t f = 0; f < k; ++f) {
          const double s = scores[r * k + f][g];
          if (!std::isnan(s)) rep.push_back(s);
        }
        if (!rep.empty()) res.perRepeatScores[r][g] = mean(rep);
        all.insert(all.end(), rep.begin(), rep.end());
      }
      pt.foldsUsed = static_cast<int>(all.size());
      pt.meanDeviance = all.empty() ? nan : mean(all);
      pt.sdDeviance = sampleSd(all);
      (all.empty() ? res.excluded : res.grid).push_back(pt);
    }
  }
  res.bestIndex = selectBest(res.grid);
  return res;
}

/// Repeated k-fold cross-validation; repeat r uses folds drawn with deriveSeed(rngSeed, r).
inline CvResult crossValidate(const Dataset& data, const CvConfig& cv, const LtsConfig& lts = {},
                              const SolverConfig& solver = {}) {
  data.validateForFit();
  cv.validate();
  std::vector<std::vector<int>> folds;
  for (int r = 0; r < cv.nRepeats; ++r)
    folds.push_back(makeFolds(data.rows(), data.y(), cv.kFolds, cv.stratified,
                              deriveSeed(cv.rngSeed, detail::kFoldStream + static_cast<std::uint64_t>(r))));
  return crossValidateWithFolds(data, cv, folds, lts, solver);
}

/// CSV table: alpha,lambda,mean_deviance,sd_deviance,n_nonzero.
inline void writeCvTable(std::ostream& os, const CvResult& res) {
  os << "alpha,lambda,mean_deviance,sd_deviance,n_nonzero\n";
  for (const auto& pt : res.grid) {
    os << formatDouble(pt.alpha) << ',' << formatDouble(pt.lambda) << ',' << formatDouble(pt.meanDeviance) << ','
       << formatDouble(pt.sdDeviance) << ',' << (pt.nNonzero >= 0 ? std::to_string(pt.nNonzero) : "NA") << '\n';
  }
}

}  // namespace rslogit
