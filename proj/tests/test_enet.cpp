#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rslogit/enet.hpp"
#include "rslogit/parallel.hpp"
#include "rslogit/synthetic.hpp"

using namespace rslogit;

namespace {

SyntheticData instance(Index n, Index p, Index s, std::uint64_t seed, double rho = 0.3, double signal = 1.0) {
  SyntheticConfig c;
  c.n = n;
  c.p = p;
  c.sparsity = s;
  c.signal = signal;
  c.blockRho = rho;
  c.seed = seed;
  return generateSynthetic(c);
}

Eigen::VectorXd ones(Index p) { return Eigen::VectorXd::Ones(p); }

}  // namespace

TEST(EnetFit, HugeLambdaGivesInterceptOnlyModel) {
  const auto sd = instance(120, 8, 3, 1);
  const FitResult fit = fitEnetLogistic(sd.data, PenaltySpec{0.7, 1e6, ones(8)});
  EXPECT_TRUE((fit.coefs.beta.array() == 0.0).all());
  const double ybar = sd.data.y().mean();
  EXPECT_NEAR(fit.coefs.intercept, std::log(ybar / (1.0 - ybar)), 1e-8);
  EXPECT_TRUE(fit.converged);
}

TEST(EnetFit, ZeroPenaltyFactorExemptsCoefficient) {
  const auto sd = instance(150, 6, 3, 2);
  Eigen::VectorXd pf = ones(6);
  const Index free = sd.truth.support.front();
  pf(free) = 0.0;
  const FitResult fit = fitEnetLogistic(sd.data, PenaltySpec{1.0, 1e6, pf});
  EXPECT_NE(fit.coefs.beta(free), 0.0);
  for (Index j = 0; j < 6; ++j)
    if (j != free) {
      EXPECT_EQ(fit.coefs.beta(j), 0.0);
    }
  EXPECT_LT(oracle::kkt(sd.data, fit).worst(), 1e-5);
}

TEST(EnetFit, KktHoldsAlongPaths) {
  const auto sd = instance(200, 15, 4, 3);
  for (double alpha : {0.0, 0.3, 1.0}) {
    const auto grid = lambdaGrid(sd.data, alpha, ones(15), 25, 0.01);
    const auto path = fitEnetPath(sd.data, alpha, ones(15), grid);
    for (const auto& fit : path) {
      EXPECT_TRUE(fit.converged);
      EXPECT_LT(oracle::kkt(sd.data, fit).worst(), 1e-5) << "alpha=" << alpha << " lambda=" << fit.spec.lambda;
    }
  }
}

TEST(EnetFit, MatchesProximalGradientOracle) {
  const auto sd = instance(150, 10, 3, 4);
  for (double alpha : {0.2, 0.8}) {
    for (double frac : {0.5, 0.1, 0.02}) {
      const double lam = frac * lambdaMax(sd.data, alpha, ones(10));
      const FitResult fit = fitEnetLogistic(sd.data, PenaltySpec{alpha, lam, ones(10)});
      const Coefficients ref = oracle::proximalGradient(sd.data.values, sd.data.y(), alpha, lam, ones(10));
      EXPECT_LT((fit.coefs.beta - ref.beta).cwiseAbs().maxCoeff(), 1e-5);
      EXPECT_NEAR(fit.coefs.intercept, ref.intercept, 1e-5);
    }
  }
}

TEST(EnetFit, ResultInvariants) {
  const auto sd = instance(100, 6, 2, 5);
  const FitResult fit = fitEnetLogistic(sd.data, PenaltySpec{0.5, 0.01, ones(6)});
  for (Index i = 0; i < 100; ++i) {
    const double eta = fit.coefs.intercept + sd.data.values.row(i).dot(fit.coefs.beta);
    EXPECT_NEAR(fit.fittedProb(i), sigmoid(eta), 1e-10);
  }
  EXPECT_NEAR(fit.perObsDeviance.sum(), fit.devianceTotal, 1e-8 * fit.devianceTotal);
  for (std::size_t k = 1; k < fit.objectiveTrace.size(); ++k)
    EXPECT_LE(fit.objectiveTrace[k], fit.objectiveTrace[k - 1] + 1e-8);
  EXPECT_EQ(fit.coefs.activeSet().size(), static_cast<std::size_t>(fit.coefs.nonzeroCount()));
}

TEST(EnetFit, RowPermutationInvariance) {
  const auto sd = instance(120, 8, 3, 6);
  std::vector<Index> perm = detail::iota(120);
  Rng rng(11);
  rng.shuffle(perm);
  const PenaltySpec spec{0.6, 0.02, ones(8)};
  const FitResult a = fitEnetLogistic(sd.data, spec);
  const FitResult b = fitEnetLogistic(sd.data.selectRows(perm), spec);
  EXPECT_LT((a.coefs.beta - b.coefs.beta).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(a.coefs.intercept, b.coefs.intercept, 1e-10);
}

TEST(EnetFit, WarmStartMatchesColdStart) {
  const auto sd = instance(50, 20, 3, 7);
  const auto grid = lambdaGrid(sd.data, 0.9, ones(20), 20, 0.05);
  const auto path = fitEnetPath(sd.data, 0.9, ones(20), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const FitResult cold = fitEnetLogistic(sd.data, PenaltySpec{0.9, grid[k], ones(20)});
    EXPECT_LT((cold.coefs.beta - path[k].coefs.beta).norm(), 1e-6) << k;
  }
}

TEST(EnetFit, DuplicatedColumnsShareWeightUnderElasticNet) {
  auto sd = instance(200, 5, 2, 8);
  const Index src = sd.truth.support.front();
  Dataset d = sd.data;
  d.values.conservativeResize(Eigen::NoChange, 6);
  d.values.col(5) = d.values.col(src);
  d.colNames.push_back("dup");
  const FitResult fit = fitEnetLogistic(d, PenaltySpec{0.5, 0.02, ones(6)});
  EXPECT_NE(fit.coefs.beta(src), 0.0);
  EXPECT_NEAR(fit.coefs.beta(src), fit.coefs.beta(5), 1e-6);
  const FitResult lasso = fitEnetLogistic(d, PenaltySpec{1.0, 0.02, ones(6)});
  EXPECT_LT(oracle::kkt(d, lasso).worst(), 1e-5);
  EXPECT_NEAR(lasso.coefs.beta(src) + lasso.coefs.beta(5), 2.0 * fit.coefs.beta(src),
              std::abs(fit.coefs.beta(src)));
}

TEST(EnetFit, DegenerateResponse) {
  auto sd = instance(40, 3, 1, 9);
  sd.data.response->setZero();
  try {
    fitEnetLogistic(sd.data, PenaltySpec{1.0, 0.1, ones(3)});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate response"), std::string::npos);
  }
}

TEST(EnetFit, ZeroVarianceColumns) {
  auto sd = instance(60, 4, 2, 10);
  sd.data.values.col(2).setConstant(3.5);
  const FitResult fit = fitEnetLogistic(sd.data, PenaltySpec{1.0, 0.01, ones(4)});
  EXPECT_EQ(fit.coefs.beta(2), 0.0);
  EXPECT_FALSE(fit.warnings.empty());
  Eigen::VectorXd pf = ones(4);
  pf(2) = 0.0;
  EXPECT_THROW(fitEnetLogistic(sd.data, PenaltySpec{1.0, 0.01, pf}), DataError);
}

TEST(EnetFit, ZeroOneWeightsEqualRowSubset) {
  const auto sd = instance(150, 6, 2, 12);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(150);
  std::vector<Index> keep;
  for (Index i = 0; i < 150; ++i) {
    if (i % 7 == 3) {
      w(i) = 0.0;
    } else {
      keep.push_back(i);
    }
  }
  SolverConfig cfg;
  cfg.weights = w;
  const PenaltySpec spec{0.5, 0.02, ones(6)};
  const FitResult weighted = fitEnetLogistic(sd.data, spec, cfg);
  const FitResult subset = fitEnetLogistic(sd.data.selectRows(keep), spec);
  EXPECT_LT((weighted.coefs.beta - subset.coefs.beta).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(oracle::kkt(sd.data, weighted, &w).worst(), 1e-5);
}

TEST(EnetFit, ParallelFitsMatchSerialFits) {
  const auto sd = instance(150, 10, 3, 13);
  const auto grid = lambdaGrid(sd.data, 0.5, ones(10), 8, 0.05);
  std::vector<Coefficients> serial, parallel(grid.size());
  for (double l : grid) serial.push_back(fitEnetLogistic(sd.data, PenaltySpec{0.5, l, ones(10)}).coefs);
  parallelFor(grid.size(), 4, [&](std::size_t k) {
    parallel[k] = fitEnetLogistic(sd.data, PenaltySpec{0.5, grid[k], ones(10)}).coefs;
  });
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_TRUE(serial[k].beta == parallel[k].beta);
    EXPECT_EQ(serial[k].intercept, parallel[k].intercept);
  }
}

TEST(LambdaGrid, EndpointsAndShape) {
  const auto sd = instance(100, 5, 2, 14);
  const double top = lambdaMax(sd.data, 0.5, ones(5));
  const auto two = lambdaGrid(sd.data, 0.5, ones(5), 2, 0.01);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_DOUBLE_EQ(two[0], top);
  EXPECT_DOUBLE_EQ(two[1], 0.01 * top);
  const auto grid = lambdaGrid(sd.data, 0.5, ones(5), 30, 0.001);
  for (std::size_t k = 1; k < grid.size(); ++k) EXPECT_LT(grid[k], grid[k - 1]);
  EXPECT_THROW(lambdaGrid(sd.data, 0.5, ones(5), 1, 0.01), ConfigError);
  EXPECT_THROW(lambdaGrid(sd.data, 0.5, ones(5), 10, 1.0), ConfigError);
}

TEST(LambdaGrid, LambdaMaxMatchesClosedFormAndIsTight) {
  const auto sd = instance(200, 7, 3, 15);
  for (double alpha : {1.0, 0.4}) {
    const Index n = 200;
    const auto& y = sd.data.y();
    const double ybar = y.mean();
    double brute = 0.0;
    for (Index j = 0; j < 7; ++j) {
      const auto col = sd.data.values.col(j);
      const double m = col.mean();
      const double s = std::sqrt((col.array() - m).square().sum() / n);
      double g = 0.0;
      for (Index i = 0; i < n; ++i) g += (col(i) - m) / s * (y(i) - ybar);
      brute = std::max(brute, std::abs(g) / (n * alpha));
    }
    const double top = lambdaMax(sd.data, alpha, ones(7));
    EXPECT_NEAR(top, brute, 1e-8 * brute);
    EXPECT_EQ(fitEnetLogistic(sd.data, PenaltySpec{alpha, top, ones(7)}).coefs.nonzeroCount(), 0);
    EXPECT_EQ(fitEnetLogistic(sd.data, PenaltySpec{alpha, 1.01 * top, ones(7)}).coefs.nonzeroCount(), 0);
    EXPECT_GT(fitEnetLogistic(sd.data, PenaltySpec{alpha, 0.99 * top, ones(7)}).coefs.nonzeroCount(), 0);
  }
}

TEST(LambdaGrid, RidgeUsesSmallAlphaSurrogate) {
  const auto sd = instance(100, 4, 2, 16);
  EXPECT_NEAR(lambdaMax(sd.data, 0.0, ones(4)), lambdaMax(sd.data, 0.001, ones(4)), 1e-12);
}

TEST(LambdaGrid, PenaltyFactorsPartialledOut) {
  const auto sd = instance(150, 5, 2, 17);
  Eigen::VectorXd pf = ones(5);
  pf(sd.truth.support.front()) = 0.0;
  const double top = lambdaMax(sd.data, 1.0, pf);
  const FitResult at = fitEnetLogistic(sd.data, PenaltySpec{1.0, top, pf});
  for (Index j = 0; j < 5; ++j)
    if (pf(j) > 0.0) {
      EXPECT_EQ(at.coefs.beta(j), 0.0);
    }
  const FitResult below = fitEnetLogistic(sd.data, PenaltySpec{1.0, 0.99 * top, pf});
  EXPECT_GT(below.coefs.nonzeroCount(), at.coefs.nonzeroCount());
  try {
    lambdaMax(sd.data, 1.0, Eigen::VectorXd::Zero(5));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no penalized coefficients"), std::string::npos);
  }
}

TEST(ClassicalFlags, ResidualCutoff) {
  FitResult fit;
  fit.fittedProb = Eigen::Vector3d(0.9, 0.5, 0.999999);
  Dataset d;
  d.values = Eigen::MatrixXd::Zero(3, 1);
  d.response = Eigen::Vector3d(1.0, 1.0, 1.0);
  const auto flags = flagOutliersClassical(fit, d);
  EXPECT_EQ(flags, (std::vector<int>{0, 1, 0}));
  EXPECT_NEAR(defaultCutoff(), 1.959964, 1e-6);
}

TEST(ClassicalFlags, SeparatedFitHasNoFlags) {
  Dataset d;
  d.values.resize(20, 1);
  d.response = Eigen::VectorXd(20);
  for (Index i = 0; i < 20; ++i) {
    d.values(i, 0) = i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
    (*d.response)(i) = i < 10 ? 0.0 : 1.0;
    d.rowIds.push_back("r" + std::to_string(i));
  }
  d.colNames = {"x"};
  const FitResult fit = fitEnetLogistic(d, PenaltySpec{1.0, 1e-4, ones(1)});
  const auto flags = flagOutliersClassical(fit, d);
  EXPECT_EQ(std::count(flags.begin(), flags.end(), 1), 0);
}
