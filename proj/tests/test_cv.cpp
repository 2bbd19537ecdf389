#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "rslogit/cv.hpp"
#include "rslogit/synthetic.hpp"

using namespace rslogit;

namespace {

SyntheticData instance(std::uint64_t seed, Index n = 150, Index p = 8, double flip = 0.0) {
  SyntheticConfig c;
  c.n = n;
  c.p = p;
  c.sparsity = 3;
  c.signal = 1.5;
  c.blockRho = 0.3;
  c.labelFlipRate = flip;
  c.leverageRate = flip;
  c.seed = seed;
  return generateSynthetic(c);
}

CvConfig small() {
  CvConfig cv;
  cv.alphaGrid = {0.5, 1.0};
  cv.nLambda = 8;
  cv.lambdaRatio = 0.02;
  cv.nRepeats = 2;
  return cv;
}

}  // namespace

TEST(Folds, EvenSizes) {
  const auto f = makeFolds(10, Eigen::VectorXd::Zero(10), 5, false, 1);
  std::vector<int> count(5, 0);
  for (int v : f) count[static_cast<std::size_t>(v)]++;
  for (int c : count) EXPECT_EQ(c, 2);
}

TEST(Folds, StratifiedOnePerClass) {
  Eigen::VectorXd y(10);
  y << 0, 0, 0, 0, 0, 1, 1, 1, 1, 1;
  const auto f = makeFolds(10, y, 5, true, 3);
  for (int k = 0; k < 5; ++k) {
    int zeros = 0, ones = 0;
    for (Index i = 0; i < 10; ++i)
      if (f[static_cast<std::size_t>(i)] == k) (y(i) == 1.0 ? ones : zeros)++;
    EXPECT_EQ(zeros, 1);
    EXPECT_EQ(ones, 1);
  }
}

TEST(Folds, BalancedOverallAndPerClass) {
  const auto sd = instance(1, 103);
  const auto f = makeFolds(103, sd.data.y(), 5, true, 7);
  for (int cls : {-1, 0, 1}) {
    std::vector<int> count(5, 0);
    for (Index i = 0; i < 103; ++i)
      if (cls < 0 || sd.data.y()(i) == cls) count[static_cast<std::size_t>(f[static_cast<std::size_t>(i)])]++;
    EXPECT_LE(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()), 1);
  }
}

TEST(Folds, DeterministicAndSeedSensitive) {
  const auto sd = instance(2);
  EXPECT_EQ(makeFolds(150, sd.data.y(), 5, true, 9), makeFolds(150, sd.data.y(), 5, true, 9));
  EXPECT_NE(makeFolds(150, sd.data.y(), 5, true, 9), makeFolds(150, sd.data.y(), 5, true, 10));
}

TEST(Folds, Errors) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  y(0) = 1.0;
  EXPECT_THROW(makeFolds(10, y, 5, true, 1), DataError);
  EXPECT_THROW(makeFolds(3, Eigen::VectorXd::Zero(3), 5, false, 1), ConfigError);
  EXPECT_THROW(makeFolds(10, y, 1, false, 1), ConfigError);
}

TEST(SelectBest, TieBreaking) {
  std::vector<CvPoint> g = {{0.5, 0.1, 1.0}, {1.0, 0.1, 1.0}, {0.5, 0.2, 1.0}, {1.0, 0.05, 0.9}};
  EXPECT_EQ(selectBest(g), 3u);
  g[3].meanDeviance = 1.0;
  EXPECT_EQ(selectBest(g), 2u);  // largest lambda
  g.erase(g.begin() + 2);
  EXPECT_EQ(selectBest(g), 1u);  // equal lambda: larger alpha
  EXPECT_THROW(selectBest({}), NumericalError);
}

TEST(CrossValidate, SinglePointGrid) {
  const auto sd = instance(3);
  CvConfig cv = small();
  cv.alphaGrid = {0.7};
  cv.lambdaValues = {0.03};
  const CvResult res = crossValidate(sd.data, cv);
  ASSERT_EQ(res.grid.size(), 1u);
  EXPECT_EQ(res.best().alpha, 0.7);
  EXPECT_EQ(res.best().lambda, 0.03);
}

TEST(CrossValidate, FoldScoresMatchDirectComputation) {
  const auto sd = instance(4);
  CvConfig cv = small();
  cv.alphaGrid = {0.5};
  const CvResult res = crossValidate(sd.data, cv);
  ASSERT_EQ(res.folds.size(), 2u);
  for (const auto& folds : res.folds) {
    for (Index i = 0; i < 150; ++i) {
      const int f = folds[static_cast<std::size_t>(i)];
      EXPECT_GE(f, 0);
      EXPECT_LT(f, 5);
    }
  }
  // Recompute grid point 4 with the oracle solver.
  const std::size_t g = 4;
  std::vector<double> scores;
  for (const auto& folds : res.folds) {
    for (int f = 0; f < 5; ++f) {
      std::vector<Index> tr, te;
      for (Index i = 0; i < 150; ++i) (folds[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
      const Dataset train = sd.data.selectRows(tr), test = sd.data.selectRows(te);
      const auto c = oracle::proximalGradient(train.values, train.y(), 0.5, res.grid[g].lambda,
                                              Eigen::VectorXd::Ones(8));
      scores.push_back(oracle::meanDeviance(test.values, test.y(), c));
    }
  }
  EXPECT_NEAR(res.grid[g].meanDeviance, mean(scores), 1e-6);
  EXPECT_NEAR(res.grid[g].sdDeviance, sampleSd(scores), 1e-6);
  EXPECT_EQ(res.grid[g].foldsUsed, 10);
}

TEST(CrossValidate, LambdaMaxNoBetterThanBest) {
  const auto sd = instance(5);
  const CvResult res = crossValidate(sd.data, small());
  EXPECT_LE(res.best().meanDeviance, res.grid.front().meanDeviance);
  EXPECT_EQ(res.grid.front().nNonzero, 0);
  EXPECT_EQ(res.bestIndex, selectBest(res.grid));
}

TEST(CrossValidate, RowPermutationWithRemappedFolds) {
  const auto sd = instance(6);
  CvConfig cv = small();
  cv.alphaGrid = {0.8};
  const CvResult a = crossValidate(sd.data, cv);
  std::vector<Index> perm = detail::iota(150);
  Rng rng(4);
  rng.shuffle(perm);
  std::vector<std::vector<int>> remapped;
  for (const auto& f : a.folds) {
    std::vector<int> r(150);
    for (std::size_t k = 0; k < 150; ++k) r[k] = f[static_cast<std::size_t>(perm[k])];
    remapped.push_back(r);
  }
  const CvResult b = crossValidateWithFolds(sd.data.selectRows(perm), cv, remapped);
  ASSERT_EQ(a.grid.size(), b.grid.size());
  for (std::size_t g = 0; g < a.grid.size(); ++g) EXPECT_NEAR(a.grid[g].meanDeviance, b.grid[g].meanDeviance, 1e-8);
}

TEST(CrossValidate, ThreadCountDoesNotChangeResults) {
  const auto sd = instance(7);
  CvConfig cv = small();
  const CvResult a = crossValidate(sd.data, cv);
  cv.threads = 3;
  const CvResult b = crossValidate(sd.data, cv);
  std::ostringstream sa, sb;
  writeCvTable(sa, a);
  writeCvTable(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(CrossValidate, MoreRepeatsReduceVariance) {
  const auto sd = instance(8, 120, 6);
  CvConfig cv = small();
  cv.alphaGrid = {1.0};
  cv.lambdaValues = {0.02};
  auto spread = [&](int repeats) {
    std::vector<double> v;
    for (int r = 0; r < 20; ++r) {
      cv.nRepeats = repeats;
      cv.rngSeed = 1000 + static_cast<std::uint64_t>(r);
      v.push_back(crossValidate(sd.data, cv).best().meanDeviance);
    }
    return sampleSd(v);
  };
  EXPECT_LT(spread(10), spread(1));
}

TEST(CrossValidate, SelectedModelContainsTrueSupport) {
  SyntheticConfig c;
  c.n = 200;
  c.p = 10;
  c.sparsity = 3;
  c.signal = 1.5;
  c.seed = 21;
  const auto sd = generateSynthetic(c);
  CvConfig cv;
  cv.alphaGrid = {1.0};
  cv.nRepeats = 3;
  const CvResult res = crossValidate(sd.data, cv);
  const FitResult fit = fitEnetLogistic(sd.data, PenaltySpec{1.0, res.best().lambda, Eigen::VectorXd::Ones(10)});
  EXPECT_LT(oracle::kkt(sd.data, fit).worst(), 1e-5);
  const auto active = fit.coefs.activeSet();
  for (Index j : sd.truth.support) EXPECT_NE(std::find(active.begin(), active.end(), j), active.end()) << j;
}

TEST(CrossValidate, RobustEstimatorTrimsHeldOutDeviances) {
  const auto sd = instance(9, 120, 6, 0.1);
  CvConfig cv = small();
  cv.alphaGrid = {0.8};
  cv.nLambda = 4;
  cv.nRepeats = 1;
  cv.estimator = Estimator::Robust;
  LtsConfig lts;
  lts.nInitialSubsets = 30;
  const CvResult res = crossValidate(sd.data, cv, lts);
  EXPECT_FALSE(res.grid.empty());
  for (const auto& pt : res.grid) {
    EXPECT_TRUE(std::isfinite(pt.meanDeviance));
    EXPECT_GE(pt.nNonzero, 0);
  }
  EXPECT_NO_THROW(detail::heldOutScore(sd.data, Coefficients::zeros(6), 0.85));
  // Trimmed score of the null model: every deviance is log 2.
  EXPECT_NEAR(detail::heldOutScore(sd.data, Coefficients::zeros(6), 0.85), std::log(2.0), 1e-12);
}

TEST(CrossValidate, ConfigValidation) {
  const auto sd = instance(10);
  CvConfig cv = small();
  cv.alphaGrid.clear();
  EXPECT_THROW(crossValidate(sd.data, cv), ConfigError);
  cv = small();
  cv.kFolds = 1;
  EXPECT_THROW(crossValidate(sd.data, cv), ConfigError);
}

TEST(CvTable, CsvColumns) {
  CvResult r;
  r.grid = {{0.5, 0.25, 0.6, 0.01, 3, 10}};
  std::ostringstream os;
  writeCvTable(os, r);
  EXPECT_EQ(os.str(), "alpha,lambda,mean_deviance,sd_deviance,n_nonzero\n0.5,0.25,0.6,0.01,3\n");
}
