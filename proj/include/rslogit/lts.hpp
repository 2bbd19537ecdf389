#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rslogit/core.hpp"
#include "rslogit/enet.hpp"
#include "rslogit/parallel.hpp"
#include "rslogit/quantiles.hpp"
#include "rslogit/random.hpp"

namespace rslogit {

struct LtsConfig {
  double hFraction = 0.85;
  int nInitialSubsets = 500;
  /// Rows per elemental start, split evenly between the two classes.
  int elementalSize = 4;
  int nBestKeep = 10;
  int warmupCsteps = 2;
  int maxCsteps = 50;
  double cutoffC = defaultCutoff();
  ResidualVariant residualVariant = ResidualVariant::AsPrinted;
  std::uint64_t rngSeed = 0;
  /// Worker threads for the elemental and concentration phases (0 = all cores).
  unsigned threads = 1;

  void validate() const {
    if (!(hFraction > 0.5 && hFraction <= 1.0)) throw ConfigError("hFraction must lie in (0.5, 1]");
    if (nInitialSubsets < 1) throw ConfigError("nInitialSubsets must be >= 1");
    if (elementalSize < 2 || elementalSize % 2 != 0) throw ConfigError("elementalSize must be even and >= 2");
    if (nBestKeep < 1) throw ConfigError("nBestKeep must be >= 1");
    if (warmupCsteps < 0 || maxCsteps < 1) throw ConfigError("C-step limits are invalid");
    if (!(cutoffC > 0.0)) throw ConfigError("cutoffC must be > 0");
  }
};

/// Size of a class-proportional h-subset.
struct HSubsetSize {
  Index h = 0;
  Index h0 = 0;
  Index h1 = 0;
};

inline Index hFromFraction(Index n, double fraction) {
  if (!(fraction > 0.5 && fraction <= 1.0)) throw ConfigError("h fraction must lie in (0.5, 1]");
  // The small offset keeps products such as 0.85 * 100 from rounding down.
  return std::min<Index>(n, static_cast<Index>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
}

/// Splits h over the classes in proportion to their sizes: h1 = round(h n1 / n).
inline HSubsetSize splitByClass(Index h, const Eigen::VectorXd& y) {
  const Index n = y.size();
  const Index n1 = static_cast<Index>((y.array() == 1.0).count());
  HSubsetSize s;
  s.h = h;
  s.h1 = static_cast<Index>(std::llround(static_cast<double>(h) * static_cast<double>(n1) / static_cast<double>(n)));
  s.h0 = h - s.h1;
  if (s.h0 < 2 || s.h1 < 2) throw DataError("insufficient class size");
  return s;
}

/**
 * Concentration step: the h1 smallest-deviance label-1 rows and the h0
 * smallest-deviance label-0 rows under `coefs`. Ties go to the lower row
 * index. Returned indices are sorted.
 */
inline std::vector<Index> cStep(const Dataset& data, const Coefficients& coefs, const HSubsetSize& hs) {
  const Eigen::VectorXd d = perObservationDeviance(data, coefs);
  const auto& y = data.y();
  std::vector<Index> ones, zeros;
  for (Index i = 0; i < y.size(); ++i) (y(i) == 1.0 ? ones : zeros).push_back(i);
  auto pick = [&](std::vector<Index>& idx, Index k) {
    k = std::min<Index>(k, static_cast<Index>(idx.size()));
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](Index a, Index b) { return d(a) < d(b) || (d(a) == d(b) && a < b); });
    idx.resize(static_cast<std::size_t>(k));
  };
  pick(ones, hs.h1);
  pick(zeros, hs.h0);
  std::vector<Index> out;
  out.reserve(ones.size() + zeros.size());
  out.insert(out.end(), ones.begin(), ones.end());
  out.insert(out.end(), zeros.begin(), zeros.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// sum_{i in H} d_i + |H| lambda P(b), with b the coefficients on the given scaling.
inline double trimmedObjective(const Dataset& data, const Coefficients& coefs, const std::vector<Index>& subset,
                               const PenaltySpec& spec, const ColumnScaling& scaling) {
  const Eigen::VectorXd d = perObservationDeviance(data, coefs);
  double s = 0.0;
  for (Index i : subset) s += d(i);
  return s + penaltyValue(spec, toStandardized(coefs, scaling).beta, static_cast<double>(subset.size()));
}

/// One concentration trajectory.
struct CandidateTrace {
  int startId = 0;
  std::vector<Index> subset;
  Coefficients coefs;
  double objective = 0.0;
  /// Trimmed objective at the start and after every C-step.
  std::vector<double> objectiveTrace;
  int csteps = 0;
  bool subsetConverged = false;
};

struct RobustFitResult {
  Coefficients rawCoefs;
  Coefficients reweightedCoefs;
  /// 0/1 reweighting weights.
  Eigen::VectorXd weights;
  /// 1 - weights.
  std::vector<int> outlierFlags;
  std::vector<Index> hSubset;
  /// Residuals of the raw fit.
  Eigen::VectorXd pearsonResiduals;
  PenaltySpec spec;

  double rawObjective = 0.0;
  HSubsetSize hSize;
  double cutoff = 0.0;
  ColumnScaling scaling;
  FitResult reweightedFit;
  /// Retained candidates after concentration, best first.
  std::vector<CandidateTrace> candidates;
  int failedStarts = 0;

  Index outlierCount() const { return std::count(outlierFlags.begin(), outlierFlags.end(), 1); }
};

namespace detail {

inline Eigen::VectorXd indicator(Index n, const std::vector<Index>& rows) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Index i : rows) w(i) = 1.0;
  return w;
}

inline FitResult fitOnRows(const Dataset& data, const PenaltySpec& spec, SolverConfig cfg,
                           const std::vector<Index>& rows, const Coefficients* warm) {
  cfg.weights = indicator(data.rows(), rows);
  return fitEnetLogistic(data, spec, cfg, warm);
}

/**
 * Runs C-steps from `coefs` (fitted on `subset`) until the subset repeats or
 * the step budget is spent. `steps` counts C-steps already taken.
 */
inline void concentrate(const Dataset& data, const PenaltySpec& spec, const SolverConfig& cfg,
                        const ColumnScaling& scaling, const HSubsetSize& hs, CandidateTrace& cand, int maxSteps) {
  while (cand.csteps < maxSteps) {
    auto next = cStep(data, cand.coefs, hs);
    if (next == cand.subset) {
      cand.subsetConverged = true;
      return;
    }
    const FitResult fit = fitOnRows(data, spec, cfg, next, &cand.coefs);
    cand.coefs = fit.coefs;
    cand.subset = std::move(next);
    cand.objective = trimmedObjective(data, cand.coefs, cand.subset, spec, scaling);
    cand.objectiveTrace.push_back(cand.objective);
    ++cand.csteps;
  }
  cand.subsetConverged = cStep(data, cand.coefs, hs) == cand.subset;
}

/**
 * Starts a trajectory from a fit on arbitrary rows. When the rows are not an
 * h-subset (elemental starts), the starting objective is the trimmed
 * objective of that fit, i.e. evaluated on its own C-step target.
 */
inline CandidateTrace startFrom(const Dataset& data, const PenaltySpec& spec, const SolverConfig& cfg,
                                const ColumnScaling& scaling, const HSubsetSize& hs, int id,
                                const std::vector<Index>& rows, const Coefficients* warm) {
  CandidateTrace c;
  c.startId = id;
  const FitResult fit = fitOnRows(data, spec, cfg, rows, warm);
  c.coefs = fit.coefs;
  c.subset = rows;
  const bool isHSubset = static_cast<Index>(rows.size()) == hs.h;
  c.objective = trimmedObjective(data, c.coefs, isHSubset ? rows : cStep(data, c.coefs, hs), spec, scaling);
  c.objectiveTrace.push_back(c.objective);
  return c;
}

inline bool candidateLess(const CandidateTrace& a, const CandidateTrace& b) {
  return a.objective < b.objective || (a.objective == b.objective && a.startId < b.startId);
}

struct LtsSetup {
  HSubsetSize hs;
  SolverConfig solver;
  ColumnScaling scaling;
};

inline LtsSetup prepare(const Dataset& data, const PenaltySpec& spec, const LtsConfig& lts,
                        const SolverConfig& solverConfig) {
  data.validateForFit();
  spec.validate(data.cols());
  lts.validate();
  solverConfig.validate(data.rows());
  if (data.rows() < 10) throw DataError("robust fit needs at least 10 observations");
  if (data.classCount(0) == 0 || data.classCount(1) == 0) throw DataError("degenerate response");
  LtsSetup s;
  s.hs = splitByClass(hFromFraction(data.rows(), lts.hFraction), data.y());
  if (s.hs.h < lts.elementalSize) throw ConfigError("h is smaller than the elemental subset size");
  s.solver = solverConfig;
  s.solver.weights.reset();
  // One robust scaling from all rows keeps the penalty on a fixed scale
  // across C-steps, which the monotonicity of the trimmed objective needs.
  s.scaling = solverConfig.fixedScaling
                  ? *solverConfig.fixedScaling
                  : computeScaling(data.values, Eigen::VectorXd::Ones(data.rows()), solverConfig.standardize,
                                   StandardizationMode::Robust);
  s.solver.fixedScaling = s.scaling;
  return s;
}

inline RobustFitResult finish(const Dataset& data, const PenaltySpec& spec, const LtsConfig& lts,
                              const LtsSetup& setup, std::vector<CandidateTrace> kept, int failed) {
  std::sort(kept.begin(), kept.end(), candidateLess);
  RobustFitResult res;
  res.spec = spec;
  res.hSize = setup.hs;
  res.cutoff = lts.cutoffC;
  res.scaling = setup.scaling;
  res.failedStarts = failed;
  res.rawCoefs = kept.front().coefs;
  res.hSubset = kept.front().subset;
  res.rawObjective = kept.front().objective;

  const Index n = data.rows();
  const auto& y = data.y();
  const Eigen::VectorXd prob = predictProb(res.rawCoefs, data);
  res.pearsonResiduals.resize(n);
  res.weights.resize(n);
  res.outlierFlags.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    res.pearsonResiduals(i) = pearsonResidual(y(i), prob(i), lts.residualVariant);
    const bool outlier = std::abs(res.pearsonResiduals(i)) >= lts.cutoffC;
    res.weights(i) = outlier ? 0.0 : 1.0;
    res.outlierFlags[static_cast<std::size_t>(i)] = outlier ? 1 : 0;
  }

  SolverConfig rw = setup.solver;
  rw.weights = res.weights;
  try {
    res.reweightedFit = fitEnetLogistic(data, spec, rw, &res.rawCoefs);
  } catch (const DataError& e) {
    throw NumericalError(std::string("reweighted fit failed: ") + e.what());
  }
  res.reweightedCoefs = res.reweightedFit.coefs;
  res.candidates = std::move(kept);
  return res;
}

inline std::vector<CandidateTrace> concentrateAll(const Dataset& data, const PenaltySpec& spec, const LtsConfig& lts,
                                                  const LtsSetup& setup, std::vector<CandidateTrace> cands) {
  parallelFor(cands.size(), lts.threads, [&](std::size_t k) {
    concentrate(data, spec, setup.solver, setup.scaling, setup.hs, cands[k], lts.maxCsteps);
  });
  return cands;
}

}  // namespace detail

/**
 * Robust sparse logistic regression: trimmed penalized deviance over a
 * class-proportional h-subset, followed by a 0/1 reweighting step and a
 * weighted refit penalized with n_w = sum w_i.
 *
 * Raw phase: nInitialSubsets elemental starts (elementalSize/2 rows per
 * class), each fitted and concentrated for warmupCsteps C-steps; the
 * nBestKeep lowest trimmed objectives are concentrated to convergence and
 * the best becomes the raw estimate. All subsets are drawn up front from one
 * generator, and candidates are ordered by (objective, start id), so results
 * do not depend on the thread count.
 */
inline RobustFitResult fitEnetLts(const Dataset& data, const PenaltySpec& spec, const LtsConfig& lts = {},
                                  const SolverConfig& solverConfig = {}) {
  const auto setup = detail::prepare(data, spec, lts, solverConfig);
  const auto& y = data.y();
  std::vector<Index> ones, zeros;
  for (Index i = 0; i < y.size(); ++i) (y(i) == 1.0 ? ones : zeros).push_back(i);
  const std::size_t perClass = static_cast<std::size_t>(lts.elementalSize / 2);
  if (ones.size() < perClass || zeros.size() < perClass) throw DataError("insufficient class size");

  Rng rng(lts.rngSeed);
  std::vector<std::vector<Index>> starts(static_cast<std::size_t>(lts.nInitialSubsets));
  for (auto& s : starts) {
    s = rng.sample(ones, perClass);
    auto z = rng.sample(zeros, perClass);
    s.insert(s.end(), z.begin(), z.end());
    std::sort(s.begin(), s.end());
  }

  std::vector<std::optional<CandidateTrace>> slots(starts.size());
  parallelFor(starts.size(), lts.threads, [&](std::size_t k) {
    try {
      auto c = detail::startFrom(data, spec, setup.solver, setup.scaling, setup.hs, static_cast<int>(k), starts[k],
                                 nullptr);
      detail::concentrate(data, spec, setup.solver, setup.scaling, setup.hs, c, lts.warmupCsteps);
      if (std::isfinite(c.objective)) slots[k] = std::move(c);
    } catch (const Error&) {
      // Elemental fits that fail are skipped.
    }
  });

  std::vector<CandidateTrace> cands;
  int failed = 0;
  for (auto& s : slots) {
    if (s) {
      cands.push_back(std::move(*s));
    } else {
      ++failed;
    }
  }
  if (cands.empty()) throw NumericalError("no valid initial subset");
  std::sort(cands.begin(), cands.end(), detail::candidateLess);
  if (static_cast<int>(cands.size()) > lts.nBestKeep) cands.resize(static_cast<std::size_t>(lts.nBestKeep));

  auto kept = detail::concentrateAll(data, spec, lts, setup, std::move(cands));
  return detail::finish(data, spec, lts, setup, std::move(kept), failed);
}

/**
 * Same estimator, but concentration starts from the given row subsets
 * instead of elemental draws. Used to warm-start neighbouring grid points
 * with the retained subsets of a previous fit.
 */
inline RobustFitResult fitEnetLtsFromSubsets(const Dataset& data, const PenaltySpec& spec,
                                             const std::vector<std::vector<Index>>& startSubsets,
                                             const LtsConfig& lts = {}, const SolverConfig& solverConfig = {}) {
  if (startSubsets.empty()) throw ConfigError("no start subsets given");
  const auto setup = detail::prepare(data, spec, lts, solverConfig);
  std::vector<std::optional<CandidateTrace>> slots(startSubsets.size());
  parallelFor(startSubsets.size(), lts.threads, [&](std::size_t k) {
    try {
      slots[k] = detail::startFrom(data, spec, setup.solver, setup.scaling, setup.hs, static_cast<int>(k),
                                   startSubsets[k], nullptr);
    } catch (const Error&) {
    }
  });
  std::vector<CandidateTrace> cands;
  int failed = 0;
  for (auto& s : slots) {
    if (s) {
      cands.push_back(std::move(*s));
    } else {
      ++failed;
    }
  }
  if (cands.empty()) throw NumericalError("no valid initial subset");
  auto kept = detail::concentrateAll(data, spec, lts, setup, std::move(cands));
  return detail::finish(data, spec, lts, setup, std::move(kept), failed);
}

}  // namespace rslogit
