#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rslogit/core.hpp"
#include "rslogit/quantiles.hpp"
#include "rslogit/robust_stats.hpp"

namespace rslogit {

enum class StandardizationMode { Classical, Robust };

/// Column centers and scales. A zero scale marks a column treated as constant.
struct ColumnScaling {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

struct SolverConfig {
  int maxOuterIters = 100;
  int maxInnerSweeps = 1000;
  /// Convergence threshold on the largest absolute change of a standardized
  /// coefficient (intercept included) per IRLS step.
  double coefTol = 1e-7;
  bool standardize = true;
  StandardizationMode standardizationMode = StandardizationMode::Classical;
  /// Observation weights in [0, 1]; rows with weight 0 are ignored entirely.
  std::optional<Eigen::VectorXd> weights;
  /// Overrides the scaling the solver would otherwise estimate from the data.
  std::optional<ColumnScaling> fixedScaling;

  void validate(Index n) const {
    if (maxOuterIters < 1 || maxInnerSweeps < 1) throw ConfigError("iteration limits must be >= 1");
    if (!(coefTol > 0.0)) throw ConfigError("coefTol must be > 0");
    if (weights) {
      if (weights->size() != n) throw ConfigError("weight vector length does not match rows");
      if ((weights->array() < 0.0).any() || (weights->array() > 1.0).any() || !weights->allFinite())
        throw ConfigError("weights must lie in [0, 1]");
      if (!(weights->sum() > 0.0)) throw ConfigError("weights must have a positive sum");
    }
  }
};

struct FitResult {
  /// Coefficients on the original predictor scale.
  Coefficients coefs;
  PenaltySpec spec;
  /// Unweighted deviance summed over all rows.
  double devianceTotal = 0.0;
  Eigen::VectorXd perObsDeviance;
  Eigen::VectorXd fittedProb;
  bool converged = false;
  int itersUsed = 0;

  /// Coefficients in the standardized parametrization the penalty acts on.
  Coefficients standardizedCoefs;
  ColumnScaling scaling;
  /// Sum of observation weights (n_w); equals n without weights.
  double weightSum = 0.0;
  /// Penalized weighted objective at the solution.
  double objective = 0.0;
  /// Objective after each accepted IRLS step (non-increasing).
  std::vector<double> objectiveTrace;
  std::vector<std::string> warnings;
};

namespace detail {

inline bool isConstantScale(double sd, double center) {
  return !(sd > 1e-12 * std::max(1.0, std::abs(center)));
}

}  // namespace detail

/**
 * Centers and scales estimated over the rows with positive weight.
 * Classical: weighted mean and weighted population SD. Robust: median and
 * 1.4826 * MAD, falling back to the SD when the MAD vanishes (e.g. columns
 * with many ties). With standardize off the scale is 1 (0 for constant
 * columns) and only the center is estimated.
 */
inline ColumnScaling computeScaling(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, bool standardize,
                                    StandardizationMode mode) {
  const Index n = x.rows(), p = x.cols();
  ColumnScaling s{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)};
  const double sw = w.sum();
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < p; ++j) {
    const double m = w.dot(x.col(j)) / sw;
    double var = 0.0;
    for (Index i = 0; i < n; ++i) var += w(i) * (x(i, j) - m) * (x(i, j) - m);
    const double sd = std::sqrt(var / sw);

    double center = m, scale = sd;
    if (mode == StandardizationMode::Robust) {
      buf.clear();
      for (Index i = 0; i < n; ++i)
        if (w(i) > 0.0) buf.push_back(x(i, j));
      center = median(buf);
      const double mad = madScale(buf, center);
      if (mad > 1e-12 * std::max(1.0, std::abs(center))) scale = mad;
    }
    s.center(j) = center;
    if (detail::isConstantScale(sd, m)) {
      s.scale(j) = 0.0;
    } else {
      s.scale(j) = standardize ? scale : 1.0;
    }
  }
  return s;
}

inline Coefficients toStandardized(const Coefficients& c, const ColumnScaling& s) {
  Coefficients out{c.intercept, Eigen::VectorXd::Zero(c.beta.size())};
  for (Index j = 0; j < c.beta.size(); ++j) {
    if (s.scale(j) > 0.0) {
      out.beta(j) = c.beta(j) * s.scale(j);
      out.intercept += c.beta(j) * s.center(j);
    }
  }
  return out;
}

inline Coefficients toOriginal(const Coefficients& c, const ColumnScaling& s) {
  Coefficients out{c.intercept, Eigen::VectorXd::Zero(c.beta.size())};
  for (Index j = 0; j < c.beta.size(); ++j) {
    if (s.scale(j) > 0.0) {
      out.beta(j) = c.beta(j) / s.scale(j);
      out.intercept -= out.beta(j) * s.center(j);
    }
  }
  return out;
}

namespace detail {

inline constexpr double kMinWorkingWeight = 1e-5;

/// Penalized weighted logistic problem restricted to rows with positive weight.
struct Problem {
  Eigen::MatrixXd z;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
  Eigen::VectorXd l1;
  Eigen::VectorXd l2;
  std::vector<char> movable;
  double weightSum = 0.0;
};

struct State {
  double b0 = 0.0;
  Eigen::VectorXd b;
};

inline double objective(const Problem& pr, const State& s) {
  Eigen::VectorXd eta = pr.z * s.b;
  double f = 0.0;
  for (Index i = 0; i < eta.size(); ++i) f += pr.w(i) * deviance(eta(i) + s.b0, pr.y(i));
  f += 0.5 * (pr.l2.array() * s.b.array().square()).sum() + (pr.l1.array() * s.b.array().abs()).sum();
  return f;
}

inline double softThreshold(double u, double t) {
  if (u > t) return u - t;
  if (u < -t) return u + t;
  return 0.0;
}

/**
 * Cyclic coordinate descent on the weighted least-squares surrogate
 *   1/2 sum W_i (zw_i - b0 - z_i b)^2 + sum (l2_j/2 b_j^2 + l1_j |b_j|).
 * Sweeps alternate between a full pass and passes restricted to the nonzero
 * set until a full pass changes nothing by more than `tol`.
 */
inline int coordinateDescent(const Problem& pr, const Eigen::VectorXd& wk, const Eigen::VectorXd& zw, State& s,
                             double tol, int maxSweeps) {
  const Index p = pr.z.cols();
  Eigen::VectorXd r = zw - pr.z * s.b;
  r.array() -= s.b0;
  const double sumW = wk.sum();
  const Eigen::MatrixXd wz = pr.z.array().colwise() * wk.array();
  Eigen::VectorXd h(p);
  for (Index j = 0; j < p; ++j) h(j) = pr.movable[static_cast<std::size_t>(j)] ? wz.col(j).dot(pr.z.col(j)) : 0.0;

  std::vector<Index> all;
  for (Index j = 0; j < p; ++j)
    if (pr.movable[static_cast<std::size_t>(j)]) all.push_back(j);

  auto sweep = [&](const std::vector<Index>& cols) {
    const double d0 = wk.dot(r) / sumW;
    s.b0 += d0;
    r.array() -= d0;
    double maxDelta = std::abs(d0);
    for (Index j : cols) {
      const double denom = h(j) + pr.l2(j);
      const double old = s.b(j);
      double nb = 0.0;
      if (denom > 0.0) nb = softThreshold(wz.col(j).dot(r) + h(j) * old, pr.l1(j)) / denom;
      if (nb != old) {
        r.noalias() -= (nb - old) * pr.z.col(j);
        s.b(j) = nb;
        maxDelta = std::max(maxDelta, std::abs(nb - old));
      }
    }
    return maxDelta;
  };

  int sweeps = 0;
  while (sweeps < maxSweeps) {
    ++sweeps;
    if (sweep(all) < tol) break;
    std::vector<Index> active;
    for (Index j : all)
      if (s.b(j) != 0.0) active.push_back(j);
    while (sweeps < maxSweeps) {
      ++sweeps;
      if (sweep(active) < tol) break;
    }
  }
  return sweeps;
}

struct SolveOutcome {
  bool converged = false;
  int iters = 0;
  std::vector<double> trace;
};

/**
 * Proximal Newton (IRLS) outer loop with backtracking on the penalized
 * objective, so accepted iterates never increase it. Working weights
 * pi(1 - pi) are floored at 1e-5.
 */
inline SolveOutcome solve(const Problem& pr, State& s, const SolverConfig& cfg) {
  SolveOutcome out;
  const Index m = pr.z.rows();
  double fcur = objective(pr, s);
  out.trace.push_back(fcur);
  const double innerTol = cfg.coefTol * 1e-2;
  Eigen::VectorXd wk(m), zw(m);
  for (int it = 0; it < cfg.maxOuterIters; ++it) {
    out.iters = it + 1;
    Eigen::VectorXd eta = pr.z * s.b;
    eta.array() += s.b0;
    for (Index i = 0; i < m; ++i) {
      const double pi = sigmoid(eta(i));
      const double v = std::max(pi * (1.0 - pi), kMinWorkingWeight);
      wk(i) = pr.w(i) * v;
      zw(i) = eta(i) + (pr.y(i) - pi) / v;
    }
    State cand = s;
    coordinateDescent(pr, wk, zw, cand, innerTol, cfg.maxInnerSweeps);

    const double fullStep =
        std::max(std::abs(cand.b0 - s.b0), s.b.size() ? (cand.b - s.b).cwiseAbs().maxCoeff() : 0.0);
    double t = 1.0;
    bool accepted = false;
    State trial = cand;
    double ftrial = objective(pr, trial);
    const double slack = 1e-13 * std::max(1.0, std::abs(fcur));
    for (int k = 0; k < 40; ++k) {
      if (ftrial <= fcur + slack) {
        accepted = true;
        break;
      }
      t *= 0.5;
      trial.b0 = s.b0 + t * (cand.b0 - s.b0);
      trial.b = s.b + t * (cand.b - s.b);
      ftrial = objective(pr, trial);
    }
    if (!accepted) {
      out.converged = fullStep < 10.0 * cfg.coefTol;
      break;
    }
    s = trial;
    fcur = std::min(fcur, ftrial);
    out.trace.push_back(ftrial);
    if (t * fullStep < cfg.coefTol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

inline std::vector<Index> positiveRows(const Eigen::VectorXd& w) {
  std::vector<Index> rows;
  for (Index i = 0; i < w.size(); ++i)
    if (w(i) > 0.0) rows.push_back(i);
  return rows;
}

/// Builds the standardized problem; `frozen` pins coefficients at zero.
inline Problem buildProblem(const Dataset& data, const Eigen::VectorXd& w, const ColumnScaling& scaling,
                            const PenaltySpec& spec, std::vector<std::string>* warnings,
                            const std::vector<char>* frozen = nullptr) {
  const auto rows = positiveRows(w);
  const Index m = static_cast<Index>(rows.size()), p = data.cols();
  Problem pr;
  pr.z.resize(m, p);
  pr.y.resize(m);
  pr.w.resize(m);
  const auto& y = data.y();
  for (Index r = 0; r < m; ++r) {
    const Index i = rows[static_cast<std::size_t>(r)];
    pr.y(r) = y(i);
    pr.w(r) = w(i);
  }
  pr.weightSum = pr.w.sum();
  pr.movable.assign(static_cast<std::size_t>(p), 1);
  pr.l1.resize(p);
  pr.l2.resize(p);
  for (Index j = 0; j < p; ++j) {
    const double sc = scaling.scale(j);
    const double pf = spec.penaltyFactors(j);
    if (sc > 0.0) {
      for (Index r = 0; r < m; ++r)
        pr.z(r, j) = (data.values(rows[static_cast<std::size_t>(r)], j) - scaling.center(j)) / sc;
    } else {
      pr.z.col(j).setZero();
      pr.movable[static_cast<std::size_t>(j)] = 0;
      if (pf == 0.0) {
        throw DataError("unpenalized column '" + data.colNames[static_cast<std::size_t>(j)] +
                        "' is constant");
      }
      if (warnings)
        warnings->push_back("column '" + data.colNames[static_cast<std::size_t>(j)] +
                            "' has zero variance; coefficient fixed at 0");
    }
    if (frozen && (*frozen)[static_cast<std::size_t>(j)]) pr.movable[static_cast<std::size_t>(j)] = 0;
    pr.l1(j) = pr.weightSum * spec.lambda * spec.alpha * pf;
    pr.l2(j) = pr.weightSum * spec.lambda * (1.0 - spec.alpha) * pf * pf;
  }
  return pr;
}

inline void requireBothClasses(const Dataset& data, const Eigen::VectorXd& w) {
  bool has0 = false, has1 = false;
  const auto& y = data.y();
  for (Index i = 0; i < y.size(); ++i) {
    if (w(i) <= 0.0) continue;
    (y(i) == 1.0 ? has1 : has0) = true;
  }
  if (!(has0 && has1)) throw DataError("degenerate response");
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace detail

/**
 * Penalized logistic regression
 *   sum_i w_i d_i(b) + n_w lambda [(1 - alpha)/2 ||p.b||^2 + alpha ||p.b||_1]
 * where b are the coefficients on the standardized scale and n_w = sum w_i.
 * `warmStart` (original scale) seeds the iteration; it only affects speed.
 */
inline FitResult fitEnetLogistic(const Dataset& data, const PenaltySpec& spec, const SolverConfig& config = {},
                                 const Coefficients* warmStart = nullptr) {
  data.validateForFit();
  spec.validate(data.cols());
  config.validate(data.rows());
  const Index n = data.rows(), p = data.cols();
  const Eigen::VectorXd w = config.weights ? *config.weights : Eigen::VectorXd::Ones(n);
  detail::requireBothClasses(data, w);

  FitResult res;
  res.spec = spec;
  res.scaling = config.fixedScaling ? *config.fixedScaling
                                    : computeScaling(data.values, w, config.standardize, config.standardizationMode);
  if (res.scaling.center.size() != p || res.scaling.scale.size() != p)
    throw ConfigError("fixed scaling does not match predictor count");
  const detail::Problem pr = detail::buildProblem(data, w, res.scaling, spec, &res.warnings);
  res.weightSum = pr.weightSum;

  detail::State st;
  if (warmStart) {
    checkDims(data, *warmStart);
    const Coefficients ws = toStandardized(*warmStart, res.scaling);
    st.b0 = ws.intercept;
    st.b = ws.beta;
    for (Index j = 0; j < p; ++j)
      if (!pr.movable[static_cast<std::size_t>(j)]) st.b(j) = 0.0;
  } else {
    st.b = Eigen::VectorXd::Zero(p);
    st.b0 = detail::logit(pr.w.dot(pr.y) / pr.weightSum);
  }

  auto outcome = detail::solve(pr, st, config);
  res.converged = outcome.converged;
  res.itersUsed = outcome.iters;
  res.objectiveTrace = std::move(outcome.trace);
  res.objective = res.objectiveTrace.back();
  res.standardizedCoefs = Coefficients{st.b0, st.b};
  res.coefs = toOriginal(res.standardizedCoefs, res.scaling);
  res.perObsDeviance = perObservationDeviance(data, res.coefs);
  res.devianceTotal = res.perObsDeviance.sum();
  res.fittedProb = predictProb(res.coefs, data);
  return res;
}

/**
 * Smallest lambda at which every penalized coefficient is zero:
 *   max_j |z_j' w (y - pi0)| / (n_w alpha p_j)   over j with p_j > 0,
 * on the standardized design, where pi0 is the fit of the intercept and the
 * unpenalized (p_j = 0) columns alone. For alpha = 0 the formula uses
 * alpha = 0.001. The returned value carries a 1e-9 relative margin so that
 * a fit at exactly this lambda is null despite rounding.
 */
inline double lambdaMax(const Dataset& data, double alpha, const Eigen::VectorXd& penaltyFactors,
                        const SolverConfig& config = {}) {
  data.validateForFit();
  config.validate(data.rows());
  const Index n = data.rows(), p = data.cols();
  PenaltySpec probe{alpha, 0.0, penaltyFactors};
  probe.validate(p);
  if ((penaltyFactors.array() == 0.0).all()) throw ConfigError("no penalized coefficients");
  const Eigen::VectorXd w = config.weights ? *config.weights : Eigen::VectorXd::Ones(n);
  detail::requireBothClasses(data, w);
  const ColumnScaling scaling = config.fixedScaling
                                    ? *config.fixedScaling
                                    : computeScaling(data.values, w, config.standardize, config.standardizationMode);

  // Partial out the unpenalized columns with a fit in which every penalized
  // coefficient is pinned at zero.
  std::vector<char> frozen(static_cast<std::size_t>(p), 0);
  for (Index j = 0; j < p; ++j) frozen[static_cast<std::size_t>(j)] = penaltyFactors(j) > 0.0;
  const detail::Problem pr = detail::buildProblem(data, w, scaling, probe, nullptr, &frozen);
  detail::State st{detail::logit(pr.w.dot(pr.y) / pr.weightSum), Eigen::VectorXd::Zero(p)};
  if (std::find(frozen.begin(), frozen.end(), 0) != frozen.end()) detail::solve(pr, st, config);

  Eigen::VectorXd eta = pr.z * st.b;
  eta.array() += st.b0;
  Eigen::VectorXd resid(eta.size());
  for (Index i = 0; i < eta.size(); ++i) resid(i) = pr.w(i) * (pr.y(i) - sigmoid(eta(i)));
  const double a = alpha > 0.0 ? alpha : 1e-3;
  double best = 0.0;
  for (Index j = 0; j < p; ++j) {
    if (penaltyFactors(j) <= 0.0 || scaling.scale(j) <= 0.0) continue;
    best = std::max(best, std::abs(pr.z.col(j).dot(resid)) / (pr.weightSum * a * penaltyFactors(j)));
  }
  if (!(best > 0.0)) throw DataError("no penalized coefficient has a nonzero gradient at the null model");
  return best * (1.0 + 1e-9);
}

/// Geometric grid from lambdaMax down to ratio * lambdaMax.
inline std::vector<double> lambdaGrid(const Dataset& data, double alpha, const Eigen::VectorXd& penaltyFactors,
                                      int nLambda, double ratio, const SolverConfig& config = {}) {
  if (nLambda < 2) throw ConfigError("nLambda must be >= 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("lambda ratio must lie in (0, 1)");
  const double top = lambdaMax(data, alpha, penaltyFactors, config);
  std::vector<double> grid(static_cast<std::size_t>(nLambda));
  for (int k = 0; k < nLambda; ++k)
    grid[static_cast<std::size_t>(k)] = top * std::pow(ratio, static_cast<double>(k) / (nLambda - 1));
  grid.back() = top * ratio;
  return grid;
}

/// Fits along a decreasing lambda sequence, warm-starting each fit from the previous one.
inline std::vector<FitResult> fitEnetPath(const Dataset& data, double alpha, const Eigen::VectorXd& penaltyFactors,
                                          const std::vector<double>& lambdas, const SolverConfig& config = {}) {
  std::vector<FitResult> path;
  path.reserve(lambdas.size());
  for (double lam : lambdas) {
    const Coefficients* warm = path.empty() ? nullptr : &path.back().coefs;
    path.push_back(fitEnetLogistic(data, PenaltySpec{alpha, lam, penaltyFactors}, config, warm));
  }
  return path;
}

/// Flags rows whose residual under the fitted model reaches the cutoff.
inline std::vector<int> flagOutliersClassical(const FitResult& fit, const Dataset& data,
                                              double cutoff = defaultCutoff(),
                                              ResidualVariant variant = ResidualVariant::AsPrinted) {
  const auto& y = data.y();
  if (fit.fittedProb.size() != y.size()) throw DataError("fit and data row counts differ");
  std::vector<int> flags(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i)
    flags[static_cast<std::size_t>(i)] = std::abs(pearsonResidual(y(i), fit.fittedProb(i), variant)) >= cutoff;
  return flags;
}

}  // namespace rslogit
