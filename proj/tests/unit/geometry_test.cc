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

#include <algorithm>

#include "atlas/errors.h"
#include "atlas/geometry.h"
#include "support/support.h"

namespace atlas {
namespace {

EmbeddingMatrix RandomUnitRows(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<float> v;
  for (std::size_t i = 0; i < n; ++i) {
    for (double x : testing::UnitVector(rng, d)) v.push_back(static_cast<float>(x));
  }
  return EmbeddingMatrix(n, d, v);
}

TEST(Distance, CosineAndEuclidean) {
  const std::vector<float> a = {1, 0}, b = {0, 1}, c = {-1, 0};
  EXPECT_DOUBLE_EQ(CosineDistance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(CosineDistance(a, b), 1.0);
  EXPECT_DOUBLE_EQ(CosineDistance(a, c), 2.0);
  EXPECT_DOUBLE_EQ(EuclideanDistance(a, b), std::sqrt(2.0));
}

// Property: Knn agrees with a full sort by (distance, pool position).
TEST(Knn, MatchesFullSort) {
  Rng rng(21);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 5 + rng.UniformIndex(60), d = 1 + rng.UniformIndex(6);
    const EmbeddingMatrix m = RandomUnitRows(rng, n, d);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.Uniform() < 0.7) pool.push_back(i);
    }
    if (pool.size() < 3) continue;
    std::reverse(pool.begin(), pool.end());
    KnnOptions opt;
    opt.k = 1 + rng.UniformIndex(pool.size() - 1);
    opt.exclude_self = t % 2 == 0;
    opt.metric = t % 3 == 0 ? Metric::kEuclidean : Metric::kCosine;
    opt.workers = 1 + static_cast<int>(t % 4);
    const auto queries = AllRows(n);
    const auto got = Knn(m, queries, pool, opt);
    for (std::size_t q = 0; q < n; ++q) {
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (opt.exclude_self && pool[p] == q) continue;
        const double dist = opt.metric == Metric::kCosine
                                ? CosineDistance(m.row(q), m.row(pool[p]))
                                : EuclideanDistance(m.row(q), m.row(pool[p]));
        all.emplace_back(dist, p);
      }
      std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) {
        return a.first < b.first;
      });
      ASSERT_EQ(got[q].query_index, q);
      ASSERT_EQ(got[q].neighbors.size(), std::min(opt.k, all.size()));
      for (std::size_t r = 0; r < got[q].neighbors.size(); ++r) {
        EXPECT_EQ(got[q].neighbors[r].index, pool[all[r].second]);
        EXPECT_DOUBLE_EQ(got[q].neighbors[r].distance, all[r].first);
      }
    }
  }
}

TEST(Knn, TiesBreakByPoolPosition) {
  const EmbeddingMatrix m(3, 2, {1, 0, 0, 1, 0, 1});
  KnnOptions opt;
  opt.k = 1;
  const std::vector<std::size_t> q = {0};
  const std::vector<std::size_t> pool = {2, 1};
  EXPECT_EQ(Knn(m, q, pool, opt)[0].neighbors[0].index, 2u);
}

TEST(Knn, KLargerThanPoolThrows) {
  const EmbeddingMatrix m(2, 1, {1, 1});
  KnnOptions opt;
  opt.k = 2;
  opt.exclude_self = true;
  const auto rows = AllRows(2);
  EXPECT_THROW(Knn(m, rows, rows, opt), Error);
}

TEST(Pca, BasisOrthonormalAndVarianceSorted) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 10 + rng.UniformIndex(40), d = 2 + rng.UniformIndex(8);
    Eigen::MatrixXd x = testing::RandomPoints(rng, n, d);
    x.col(0) *= 5.0;
    const std::size_t p = 1 + rng.UniformIndex(d);
    const ReducedMatrix r = PcaReduce(x, p);
    ASSERT_EQ(r.dims(), p);
    EXPECT_TRUE((r.basis * r.basis.transpose()).isApprox(Eigen::MatrixXd::Identity(p, p), 1e-10));
    for (Eigen::Index i = 1; i < r.explained_variance.size(); ++i) {
      EXPECT_GE(r.explained_variance(i - 1), r.explained_variance(i) - 1e-12);
    }
    for (Eigen::Index i = 0; i < r.basis.rows(); ++i) {
      Eigen::Index arg;
      r.basis.row(i).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(r.basis(i, arg), 0.0);
    }
    EXPECT_TRUE(r.Project(x).isApprox(r.values, 1e-10));
    // Variance of each projected column equals its explained variance.
    for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
      const Eigen::VectorXd c = r.values.col(j).array() - r.values.col(j).mean();
      EXPECT_NEAR(c.squaredNorm() / double(n - 1), r.explained_variance(j), 1e-9);
    }
  }
}

TEST(Pca, FullRankReconstructs) {
  Rng rng(6);
  const Eigen::MatrixXd x = testing::RandomPoints(rng, 30, 4);
  const ReducedMatrix r = PcaReduce(x, 4);
  EXPECT_TRUE(r.Reconstruct().isApprox(x, 1e-10));
  EXPECT_NEAR(r.explained_variance.sum(), r.total_variance, 1e-10);
}

TEST(Pca, RejectsBadDims) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 3);
  EXPECT_THROW(PcaReduce(x, 0), Error);
  EXPECT_THROW(PcaReduce(x, 4), Error);
  EXPECT_THROW(PcaReduce(Eigen::MatrixXd::Ones(1, 3), 1), Error);
}

}  // namespace
}  // namespace atlas
