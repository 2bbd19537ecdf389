#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace rslogit {

using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data (bad files, degenerate responses, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/**
 * Numeric predictor matrix with row/column identifiers and an optional binary
 * response. Values are stored column-major so that coordinate sweeps walk
 * contiguous memory. Missing cells are NaN; only the cellwise detector
 * accepts them.
 */
struct Dataset {
  Eigen::MatrixXd values;
  std::vector<std::string> colNames;
  std::vector<std::string> rowIds;
  std::optional<Eigen::VectorXd> response;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  bool hasResponse() const { return response.has_value(); }

  const Eigen::VectorXd& y() const {
    if (!response) throw DataError("dataset has no response column");
    return *response;
  }

  Index missingCount() const {
    return static_cast<Index>((values.array() != values.array()).count());
  }

  Index classCount(int label) const {
    const auto& yy = y();
    return static_cast<Index>((yy.array() == static_cast<double>(label)).count());
  }

  /// Checks shape, identifier uniqueness and response coding.
  void validate() const {
    if (static_cast<Index>(colNames.size()) != cols())
      throw DataError("column name count does not match matrix width");
    if (static_cast<Index>(rowIds.size()) != rows())
      throw DataError("row id count does not match matrix height");
    checkUnique(colNames, "column name");
    checkUnique(rowIds, "row id");
    if (response) {
      if (response->size() != rows()) throw DataError("response length does not match rows");
      for (Index i = 0; i < rows(); ++i) {
        double v = (*response)(i);
        if (v != 0.0 && v != 1.0)
          throw DataError("response for row '" + rowIds[static_cast<std::size_t>(i)] +
                          "' is not 0 or 1");
      }
    }
  }

  /// Stricter check used by every fitting path.
  void validateForFit() const {
    validate();
    if (!response) throw DataError("fitting requires a response");
    if (cols() < 1) throw DataError("fitting requires at least one predictor");
    if (!values.allFinite()) {
      throw DataError("predictor matrix contains " + std::to_string(missingCount()) +
                      " missing or non-finite cells");
    }
  }

  Dataset selectRows(std::span<const Index> idx) const {
    Dataset out;
    out.values.resize(static_cast<Index>(idx.size()), cols());
    out.colNames = colNames;
    out.rowIds.reserve(idx.size());
    if (response) out.response = Eigen::VectorXd(static_cast<Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Index i = idx[r];
      out.values.row(static_cast<Index>(r)) = values.row(i);
      out.rowIds.push_back(rowIds[static_cast<std::size_t>(i)]);
      if (response) (*out.response)(static_cast<Index>(r)) = (*response)(i);
    }
    return out;
  }

  Dataset selectCols(std::span<const Index> idx) const {
    Dataset out;
    out.values.resize(rows(), static_cast<Index>(idx.size()));
    out.rowIds = rowIds;
    out.response = response;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      out.values.col(static_cast<Index>(c)) = values.col(idx[c]);
      out.colNames.push_back(colNames[static_cast<std::size_t>(idx[c])]);
    }
    return out;
  }

  /// Index of a named column; throws DataError naming the column if absent.
  Index columnIndex(const std::string& name) const {
    auto it = std::find(colNames.begin(), colNames.end(), name);
    if (it == colNames.end()) throw DataError("unknown column '" + name + "'");
    return static_cast<Index>(it - colNames.begin());
  }

 private:
  static void checkUnique(const std::vector<std::string>& names, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& s : names)
      if (!seen.insert(s).second) throw DataError(std::string("duplicate ") + what + " '" + s + "'");
  }
};

/// Elastic-net penalty: level lambda, L1/L2 mixing alpha and per-coefficient factors.
struct PenaltySpec {
  double alpha = 1.0;
  double lambda = 0.0;
  Eigen::VectorXd penaltyFactors;

  static PenaltySpec uniform(Index p, double alpha, double lambda) {
    return PenaltySpec{alpha, lambda, Eigen::VectorXd::Ones(p)};
  }

  void validate(Index p) const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
    if (penaltyFactors.size() != p)
      throw ConfigError("penalty factor count " + std::to_string(penaltyFactors.size()) +
                        " does not match predictor count " + std::to_string(p));
    if ((penaltyFactors.array() < 0.0).any() || !penaltyFactors.allFinite())
      throw ConfigError("penalty factors must be finite and >= 0");
  }
};

/// Intercept plus slopes; the intercept is never penalized.
struct Coefficients {
  double intercept = 0.0;
  Eigen::VectorXd beta;

  static Coefficients zeros(Index p) { return Coefficients{0.0, Eigen::VectorXd::Zero(p)}; }

  std::vector<Index> activeSet() const {
    std::vector<Index> out;
    for (Index j = 0; j < beta.size(); ++j)
      if (beta(j) != 0.0) out.push_back(j);
    return out;
  }

  Index nonzeroCount() const { return static_cast<Index>((beta.array() != 0.0).count()); }
};

/// Logistic function. Branches at eta = 0 so exp() never overflows.
inline double sigmoid(double eta) {
  if (eta < 0.0) {
    const double e = std::exp(eta);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(-eta));
}

/// log(1 + exp(eta)) without overflow.
inline double log1pExp(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

/// Per-observation deviance log(1 + e^eta) - y * eta.
inline double deviance(double eta, double y) { return log1pExp(eta) - y * eta; }

inline void checkDims(const Dataset& data, const Coefficients& coefs) {
  if (coefs.beta.size() != data.cols())
    throw DataError("coefficient length " + std::to_string(coefs.beta.size()) +
                    " does not match predictor count " + std::to_string(data.cols()));
}

inline Eigen::VectorXd linearPredictor(const Eigen::MatrixXd& x, const Coefficients& coefs) {
  Eigen::VectorXd eta = x * coefs.beta;
  eta.array() += coefs.intercept;
  return eta;
}

inline Eigen::VectorXd perObservationDeviance(const Dataset& data, const Coefficients& coefs) {
  checkDims(data, coefs);
  const auto& y = data.y();
  const Eigen::VectorXd eta = linearPredictor(data.values, coefs);
  Eigen::VectorXd d(eta.size());
  for (Index i = 0; i < eta.size(); ++i) d(i) = deviance(eta(i), y(i));
  return d;
}

inline double totalDeviance(const Dataset& data, const Coefficients& coefs) {
  return perObservationDeviance(data, coefs).sum();
}

/// nEff * lambda * [(1 - alpha)/2 * sum (p_j b_j)^2 + alpha * sum |p_j b_j|].
inline double penaltyValue(const PenaltySpec& spec, const Eigen::VectorXd& beta, double nEff) {
  if (beta.size() != spec.penaltyFactors.size())
    throw DataError("penalty factor count does not match coefficient count");
  if (spec.lambda == 0.0) return 0.0;
  const Eigen::ArrayXd pb = spec.penaltyFactors.array() * beta.array();
  return nEff * spec.lambda *
         ((1.0 - spec.alpha) * 0.5 * pb.square().sum() + spec.alpha * pb.abs().sum());
}

enum class ResidualVariant { AsPrinted, Sqrt };

inline constexpr double kProbClamp = 1e-10;

/**
 * Pearson-type residual used for reweighting and outlier flagging.
 * AsPrinted divides by pi(1 - pi); Sqrt divides by its square root, which is
 * the textbook Pearson residual. pi is clamped to [1e-10, 1 - 1e-10].
 */
inline double pearsonResidual(double y, double pi, ResidualVariant variant = ResidualVariant::AsPrinted) {
  pi = std::clamp(pi, kProbClamp, 1.0 - kProbClamp);
  const double v = pi * (1.0 - pi);
  return variant == ResidualVariant::AsPrinted ? (y - pi) / v : (y - pi) / std::sqrt(v);
}

inline Eigen::VectorXd predictProb(const Coefficients& coefs, const Dataset& newData) {
  checkDims(newData, coefs);
  Eigen::VectorXd eta = linearPredictor(newData.values, coefs);
  return eta.unaryExpr([](double e) { return sigmoid(e); });
}

/// Hard labels at the given probability threshold (probability >= threshold -> 1).
inline std::vector<int> classify(const Eigen::VectorXd& prob, double threshold = 0.5) {
  std::vector<int> out(static_cast<std::size_t>(prob.size()));
  for (Index i = 0; i < prob.size(); ++i) out[static_cast<std::size_t>(i)] = prob(i) >= threshold ? 1 : 0;
  return out;
}

}  // namespace rslogit
