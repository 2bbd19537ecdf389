#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "rslogit/lts.hpp"
#include "rslogit/synthetic.hpp"

using namespace rslogit;

namespace {

SyntheticData instance(std::uint64_t seed, double flip = 0.0, double leverage = 0.0, Index n = 150, Index p = 8) {
  SyntheticConfig c;
  c.n = n;
  c.p = p;
  c.sparsity = 3;
  c.signal = 2.0;
  c.blockRho = 0.3;
  c.labelFlipRate = flip;
  c.leverageRate = leverage;
  c.seed = seed;
  return generateSynthetic(c);
}

LtsConfig quick(std::uint64_t seed = 1) {
  LtsConfig l;
  l.nInitialSubsets = 60;
  l.rngSeed = seed;
  return l;
}

Eigen::VectorXd ones(Index p) { return Eigen::VectorXd::Ones(p); }

}  // namespace

TEST(HSubset, SizeFromFraction) {
  EXPECT_EQ(hFromFraction(100, 0.85), 85);
  EXPECT_EQ(hFromFraction(100, 1.0), 100);
  EXPECT_EQ(hFromFraction(300, 0.85), 255);
}

TEST(HSubset, ClassProportionalSplit) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  y.head(30).setOnes();
  const auto hs = splitByClass(85, y);
  EXPECT_EQ(hs.h, 85);
  EXPECT_EQ(hs.h1, 26);  // round(85 * 30 / 100) = round(25.5)
  EXPECT_EQ(hs.h0, 59);
  Eigen::VectorXd rare = Eigen::VectorXd::Zero(100);
  rare(0) = 1.0;
  try {
    splitByClass(85, rare);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient class size"), std::string::npos);
  }
}

TEST(CStep, KeepsSmallestDeviancesPerClass) {
  const auto sd = instance(2);
  const Coefficients truth{sd.truth.intercept, sd.truth.beta};
  const auto hs = splitByClass(hFromFraction(150, 0.8), sd.data.y());
  const auto subset = cStep(sd.data, truth, hs);
  ASSERT_EQ(static_cast<Index>(subset.size()), hs.h);
  EXPECT_TRUE(std::is_sorted(subset.begin(), subset.end()));
  const Eigen::VectorXd d = perObservationDeviance(sd.data, truth);
  std::set<Index> in(subset.begin(), subset.end());
  for (int cls : {0, 1}) {
    double maxIn = -1.0, minOut = 1e300;
    Index count = 0;
    for (Index i = 0; i < 150; ++i) {
      if (sd.data.y()(i) != cls) continue;
      if (in.count(i)) {
        maxIn = std::max(maxIn, d(i));
        ++count;
      } else {
        minOut = std::min(minOut, d(i));
      }
    }
    EXPECT_LE(maxIn, minOut);
    EXPECT_EQ(count, cls == 1 ? hs.h1 : hs.h0);
  }
}

TEST(CStep, FullSizeReturnsEverything) {
  const auto sd = instance(3);
  const auto hs = splitByClass(150, sd.data.y());
  EXPECT_EQ(cStep(sd.data, Coefficients::zeros(8), hs), detail::iota(150));
}

TEST(CStep, TiesGoToLowerRowIndex) {
  Dataset d;
  d.values = Eigen::MatrixXd::Zero(6, 1);
  d.response = Eigen::VectorXd(6);
  *d.response << 0, 0, 0, 1, 1, 1;
  const HSubsetSize hs{4, 2, 2};
  // All deviances equal under zero coefficients: the lowest indices of each class win.
  EXPECT_EQ(cStep(d, Coefficients::zeros(1), hs), (std::vector<Index>{0, 1, 3, 4}));
}

TEST(CStep, PerfectClassifierExcludesFlips) {
  const auto sd = instance(4, 0.1, 0.1);
  const Coefficients truth{sd.truth.intercept, 4.0 * sd.truth.beta};
  // Sharpened true model: flipped rows carry the largest deviances.
  const auto hs = splitByClass(hFromFraction(150, 0.85), sd.data.y());
  const auto subset = cStep(sd.data, truth, hs);
  std::set<Index> in(subset.begin(), subset.end());
  Index flipsInside = 0;
  for (Index i : sd.truth.flippedRows) flipsInside += in.count(i);
  EXPECT_EQ(flipsInside, 0);
}

TEST(EnetLts, TrimmingOffReducesToClassical) {
  const auto sd = instance(5);
  LtsConfig l = quick();
  l.hFraction = 1.0;
  SolverConfig robust;
  robust.standardizationMode = StandardizationMode::Robust;
  const PenaltySpec spec{0.8, 0.02, ones(8)};
  const RobustFitResult r = fitEnetLts(sd.data, spec, l);
  const FitResult c = fitEnetLogistic(sd.data, spec, robust);
  EXPECT_LT((toStandardized(r.rawCoefs, r.scaling).beta - toStandardized(c.coefs, r.scaling).beta).cwiseAbs().maxCoeff(),
            1e-3);
  EXPECT_EQ(static_cast<Index>(r.hSubset.size()), 150);
}

TEST(EnetLts, ResultInvariants) {
  const auto sd = instance(6, 0.1, 0.1);
  const RobustFitResult r = fitEnetLts(sd.data, PenaltySpec{0.8, 0.02, ones(8)}, quick());
  EXPECT_EQ(static_cast<Index>(r.hSubset.size()), r.hSize.h);
  EXPECT_EQ(r.hSize.h, 127);
  const Eigen::VectorXd prob = predictProb(r.rawCoefs, sd.data);
  for (Index i = 0; i < 150; ++i) {
    const double res = pearsonResidual(sd.data.y()(i), prob(i));
    EXPECT_NEAR(r.pearsonResiduals(i), res, 1e-12);
    EXPECT_EQ(r.outlierFlags[static_cast<std::size_t>(i)], std::abs(res) >= r.cutoff ? 1 : 0);
    EXPECT_EQ(r.weights(i), 1.0 - r.outlierFlags[static_cast<std::size_t>(i)]);
  }
  for (const auto& c : r.candidates) EXPECT_LE(r.rawObjective, c.objective + 1e-12);
  // Reweighted fit is the weighted optimum over weight-1 rows.
  EXPECT_LT(oracle::kkt(sd.data, r.reweightedFit, &r.weights).worst(), 1e-5);
  EXPECT_NEAR(r.reweightedFit.weightSum, r.weights.sum(), 1e-12);
}

TEST(EnetLts, CStepsNeverIncreaseObjective) {
  const auto sd = instance(7, 0.1, 0.1);
  const RobustFitResult r = fitEnetLts(sd.data, PenaltySpec{0.5, 0.03, ones(8)}, quick());
  ASSERT_FALSE(r.candidates.empty());
  for (const auto& c : r.candidates)
    for (std::size_t k = 1; k < c.objectiveTrace.size(); ++k)
      EXPECT_LE(c.objectiveTrace[k], c.objectiveTrace[k - 1] + 1e-8);
}

TEST(EnetLts, FlipsAreFlagged) {
  const auto sd = instance(8, 0.1, 0.1, 200);
  const RobustFitResult r = fitEnetLts(sd.data, PenaltySpec{0.8, 0.02, ones(8)}, quick());
  Index hit = 0;
  for (Index i : sd.truth.flippedRows) hit += r.outlierFlags[static_cast<std::size_t>(i)];
  EXPECT_GE(static_cast<double>(hit), 0.8 * static_cast<double>(sd.truth.flippedRows.size()));
}

TEST(EnetLts, DeterministicGivenSeed) {
  const auto sd = instance(9, 0.1, 0.1);
  const PenaltySpec spec{0.8, 0.02, ones(8)};
  const RobustFitResult a = fitEnetLts(sd.data, spec, quick(5));
  const RobustFitResult b = fitEnetLts(sd.data, spec, quick(5));
  EXPECT_EQ(a.hSubset, b.hSubset);
  EXPECT_EQ(a.outlierFlags, b.outlierFlags);
  EXPECT_TRUE(a.reweightedCoefs.beta == b.reweightedCoefs.beta);
  LtsConfig threaded = quick(5);
  threaded.threads = 3;
  const RobustFitResult c = fitEnetLts(sd.data, spec, threaded);
  EXPECT_EQ(a.hSubset, c.hSubset);
  EXPECT_TRUE(a.rawCoefs.beta == c.rawCoefs.beta);
}

TEST(EnetLts, RestartFromSubsets) {
  const auto sd = instance(10, 0.1, 0.1);
  const PenaltySpec spec{0.8, 0.02, ones(8)};
  const RobustFitResult a = fitEnetLts(sd.data, spec, quick());
  std::vector<std::vector<Index>> starts;
  for (const auto& c : a.candidates) starts.push_back(c.subset);
  const RobustFitResult b = fitEnetLtsFromSubsets(sd.data, spec, starts, quick());
  EXPECT_LE(b.rawObjective, a.rawObjective + 1e-8);
}

TEST(EnetLts, Preconditions) {
  const auto sd = instance(11);
  EXPECT_THROW(fitEnetLts(sd.data.selectRows(std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7}),
                          PenaltySpec{1.0, 0.1, ones(8)}, quick()),
               DataError);
  LtsConfig bad = quick();
  bad.hFraction = 0.4;
  EXPECT_THROW(fitEnetLts(sd.data, PenaltySpec{1.0, 0.1, ones(8)}, bad), ConfigError);
  Dataset one = sd.data;
  one.response->setOnes();
  EXPECT_THROW(fitEnetLts(one, PenaltySpec{1.0, 0.1, ones(8)}, quick()), DataError);
}

TEST(Predict, BorderlineProbabilityClassifiedPositive) {
  Eigen::VectorXd p(2);
  p << 0.53, 0.57;
  EXPECT_EQ(classify(p), (std::vector<int>{1, 1}));
}
