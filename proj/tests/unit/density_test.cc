// Copyright 2026 The Atlas Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "atlas/density.h"
#include "atlas/errors.h"
#include "support/support.h"

namespace atlas {
namespace {

Eigen::MatrixXd TwoBlobs(Rng& rng, std::size_t n) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double c = i % 2 ? 4.0 : -4.0;
    x(i, 0) = c + rng.Normal();
    x(i, 1) = c + rng.Normal();
  }
  return x;
}

TEST(Gmm, SingleComponentIsGaussianMle) {
  Rng rng(1);
  const Eigen::MatrixXd x = testing::RandomPoints(rng, 200, 3);
  GmmOptions opt;
  opt.components = 1;
  opt.ridge = 0.0;
  const GmmModel m = FitGmm(x, opt);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / 200.0;
  EXPECT_TRUE(m.means.row(0).isApprox(mean, 1e-10));
  EXPECT_TRUE(m.covariances[0].isApprox(cov, 1e-8));
  // LogDensity against the closed-form Gaussian.
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const auto ld = LogDensity(m, x);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Eigen::VectorXd r = (x.row(i) - mean).transpose();
    const double want = -0.5 * (3 * std::log(2 * std::numbers::pi) + logdet +
                                r.dot(llt.solve(r)));
    EXPECT_NEAR(ld[static_cast<std::size_t>(i)], want, 1e-8);
  }
}

TEST(Gmm, WeightsSumToOneAndDeterministic) {
  Rng rng(2);
  const Eigen::MatrixXd x = TwoBlobs(rng, 300);
  GmmOptions opt;
  opt.components = 3;
  opt.workers = 2;
  const GmmModel a = FitGmm(x, opt), b = FitGmm(x, opt);
  EXPECT_NEAR(a.weights.sum(), 1.0, 1e-12);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  EXPECT_TRUE(a.means.isApprox(b.means, 0.0));
  for (const auto& s : a.covariances) {
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Gmm, TooFewPointsThrows) {
  GmmOptions opt;
  opt.components = 5;
  EXPECT_THROW(FitGmm(Eigen::MatrixXd::Ones(3, 2), opt), Error);
}

TEST(Bic, PrefersTwoComponentsForTwoBlobs) {
  Rng rng(3);
  const Eigen::MatrixXd x = TwoBlobs(rng, 400);
  const std::vector<std::size_t> ks = {1, 2, 3, 4};
  GmmOptions opt;
  const auto sweep = BicSweep(x, ks, opt);
  ASSERT_EQ(sweep.size(), 4u);
  const auto best = std::min_element(sweep.begin(), sweep.end(), [](auto& a, auto& b) {
    return a.bic < b.bic;
  });
  EXPECT_EQ(best->components, 2u);
  EXPECT_EQ(GmmParameterCount(2, 2), 11u);  // 1 + 2*2 + 2*3
}

TEST(DensityExtremes, HandCaseAndTies) {
  std::vector<double> s;
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) {
    s.push_back(i);
    ids.push_back("s" + std::to_string(i));
  }
  const DensityReport r = DensityExtremes(s, ids);
  EXPECT_EQ(r.sparse_rows, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.dense_rows, (std::vector<std::size_t>{39}));
  EXPECT_EQ(r.sparse_ids, (std::vector<std::string>{"s0"}));
  // Ties at the threshold are never flagged.
  std::vector<double> flat(40, 1.0);
  const DensityReport t = DensityExtremes(flat, ids);
  EXPECT_TRUE(t.sparse_rows.empty());
  EXPECT_TRUE(t.dense_rows.empty());
}

// Property: counts are invariant under any strictly increasing transform.
TEST(DensityExtremes, MonotoneTransformInvariance) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 10 + rng.UniformIndex(500);
    std::vector<double> s(n), e(n);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.Normal();
      e[i] = std::exp(3.0 * s[i]) + 2.0;
    }
    const auto a = DensityExtremes(s, ids), b = DensityExtremes(e, ids);
    EXPECT_EQ(a.sparse_rows, b.sparse_rows);
    EXPECT_EQ(a.dense_rows, b.dense_rows);
  }
}

}  // namespace
}  // namespace atlas
