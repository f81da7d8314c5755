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

#include "atlas/geometry.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "atlas/errors.h"
#include "atlas/parallel.h"

namespace atlas {
namespace {

struct FloatRows {
  const EmbeddingMatrix& m;
  double Distance(std::size_t a, std::size_t b, Metric metric) const {
    return metric == Metric::kCosine ? CosineDistance(m.row(a), m.row(b))
                                     : EuclideanDistance(m.row(a), m.row(b));
  }
  std::size_t rows() const { return m.rows(); }
};

struct DoubleRows {
  const Eigen::MatrixXd& m;
  double Distance(std::size_t a, std::size_t b, Metric metric) const {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    if (metric == Metric::kCosine) return 1.0 - m.row(ia).dot(m.row(ib));
    return (m.row(ia) - m.row(ib)).norm();
  }
  std::size_t rows() const { return static_cast<std::size_t>(m.rows()); }
};

template <typename Rows>
std::vector<NeighborList> KnnImpl(const Rows& rows,
                                  std::span<const std::size_t> queries,
                                  std::span<const std::size_t> pool,
                                  const KnnOptions& opt) {
  if (opt.k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  }
  for (std::size_t q : queries) {
    if (q >= rows.rows()) {
      throw Error(ErrorCode::kInvalidArgument, "query row out of range");
    }
  }
  for (std::size_t p : pool) {
    if (p >= rows.rows()) {
      throw Error(ErrorCode::kInvalidArgument, "pool row out of range");
    }
  }
  std::vector<NeighborList> out(queries.size());
  ParallelFor(queries.size(), opt.workers, [&](std::size_t qi) {
    const std::size_t q = queries[qi];
    // (distance, pool position)
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(pool.size());
    for (std::size_t pos = 0; pos < pool.size(); ++pos) {
      if (opt.exclude_self && pool[pos] == q) continue;
      cand.emplace_back(rows.Distance(q, pool[pos], opt.metric), pos);
    }
    if (cand.size() < opt.k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "k=" + std::to_string(opt.k) + " exceeds the available pool " +
                      "size " + std::to_string(cand.size()));
    }
    const auto kth = cand.begin() + static_cast<std::ptrdiff_t>(opt.k);
    std::partial_sort(cand.begin(), kth, cand.end());
    NeighborList list{q, {}};
    list.neighbors.reserve(opt.k);
    for (auto it = cand.begin(); it != kth; ++it) {
      list.neighbors.push_back({pool[it->second], it->first});
    }
    out[qi] = std::move(list);
  });
  return out;
}

// Eight independent partial sums in a fixed order: deterministic, and no
// longer bound by the latency of a single accumulator chain.
template <typename Term>
double Accumulate(std::size_t n, Term term) {
  std::array<double, 8> acc{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += term(i + j);
  }
  for (; i < n; ++i) acc[i % 8] += term(i);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

double CosineDistance(std::span<const float> u, std::span<const float> v) {
  return 1.0 - Accumulate(u.size(), [&](std::size_t i) {
           return double{u[i]} * double{v[i]};
         });
}

double EuclideanDistance(std::span<const float> u, std::span<const float> v) {
  return std::sqrt(Accumulate(u.size(), [&](std::size_t i) {
    const double diff = double{u[i]} - double{v[i]};
    return diff * diff;
  }));
}

std::vector<NeighborList> Knn(const EmbeddingMatrix& points,
                              std::span<const std::size_t> queries,
                              std::span<const std::size_t> pool,
                              const KnnOptions& options) {
  return KnnImpl(FloatRows{points}, queries, pool, options);
}

std::vector<NeighborList> Knn(const Eigen::MatrixXd& points,
                              std::span<const std::size_t> queries,
                              std::span<const std::size_t> pool,
                              const KnnOptions& options) {
  return KnnImpl(DoubleRows{points}, queries, pool, options);
}

std::vector<std::size_t> AllRows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

Eigen::MatrixXd ReducedMatrix::Project(const Eigen::MatrixXd& points) const {
  return (points.rowwise() - mean.transpose()) * basis.transpose();
}

Eigen::MatrixXd ReducedMatrix::Reconstruct() const {
  return (values * basis).rowwise() + mean.transpose();
}

ReducedMatrix PcaReduce(const Eigen::MatrixXd& points, std::size_t p) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "PCA needs at least two rows");
  }
  if (p == 0 || p > std::min(n, d)) {
    throw Error(ErrorCode::kInvalidArgument,
                "PCA target dimension " + std::to_string(p) +
                    " outside [1, " + std::to_string(std::min(n, d)) + "]");
  }
  ReducedMatrix out;
  out.mean = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered;
  cov /= static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kComputation, "covariance eigendecomposition failed");
  }
  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& evals = eig.eigenvalues();
  const Eigen::MatrixXd& evecs = eig.eigenvectors();
  out.total_variance = std::max(0.0, cov.trace());
  out.basis.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
  out.explained_variance.resize(static_cast<Eigen::Index>(p));
  const double floor = 1e-12 * std::max(1.0, out.total_variance);
  for (std::size_t c = 0; c < p; ++c) {
    const auto src = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = evecs.col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.basis.row(static_cast<Eigen::Index>(c)) = v.transpose();
    const double ev = std::max(0.0, evals(src));
    out.explained_variance(static_cast<Eigen::Index>(c)) = ev;
    if (ev <= floor) ++out.zero_variance_components;
  }
  out.values = centered * out.basis.transpose();
  return out;
}

ReducedMatrix PcaReduce(const EmbeddingMatrix& points, std::size_t p) {
  return PcaReduce(points.ToDouble(), p);
}

}  // namespace atlas
