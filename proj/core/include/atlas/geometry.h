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

#ifndef ATLAS_GEOMETRY_H_
#define ATLAS_GEOMETRY_H_

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "atlas/corpus.h"

namespace atlas {

enum class Metric { kCosine, kEuclidean };

// 1 - <u, v>, accumulated in double. Inputs are assumed unit-norm.
double CosineDistance(std::span<const float> u, std::span<const float> v);

double EuclideanDistance(std::span<const float> u, std::span<const float> v);

struct Neighbor {
  std::size_t index;  // row index into the point matrix
  double distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborList {
  std::size_t query_index;
  std::vector<Neighbor> neighbors;  // ascending distance
};

struct KnnOptions {
  std::size_t k = 1;
  // Skip pool entries whose row index equals the query's row index.
  bool exclude_self = false;
  Metric metric = Metric::kCosine;
  int workers = 1;
};

// Exact brute-force k nearest neighbours. `queries` and `pool` are row
// indices into `points`. Ties are broken by ascending position in `pool`.
// Throws Error(kInvalidArgument) when k exceeds the usable pool size.
std::vector<NeighborList> Knn(const EmbeddingMatrix& points,
                              std::span<const std::size_t> queries,
                              std::span<const std::size_t> pool,
                              const KnnOptions& options);

// Same over the rows of a double matrix (reduced spaces).
std::vector<NeighborList> Knn(const Eigen::MatrixXd& points,
                              std::span<const std::size_t> queries,
                              std::span<const std::size_t> pool,
                              const KnnOptions& options);

// [0, n) as an index vector.
std::vector<std::size_t> AllRows(std::size_t n);

struct ReducedMatrix {
  Eigen::MatrixXd values;              // n x p projected coordinates
  Eigen::MatrixXd basis;               // p x d orthonormal rows
  Eigen::VectorXd explained_variance;  // p, non-increasing, 1/(n-1) scaling
  Eigen::VectorXd mean;                // d
  double total_variance = 0.0;
  std::size_t zero_variance_components = 0;

  std::size_t dims() const { return static_cast<std::size_t>(basis.rows()); }

  // Coordinates of new points (rows) in the reduced basis.
  Eigen::MatrixXd Project(const Eigen::MatrixXd& points) const;
  Eigen::MatrixXd Reconstruct() const;
};

// Principal components of the row cloud via the eigendecomposition of the
// sample covariance. Requires n >= 2 and 1 <= p <= min(n, d). Each basis row
// is sign-fixed so that its largest-magnitude entry is positive.
ReducedMatrix PcaReduce(const Eigen::MatrixXd& points, std::size_t p);
ReducedMatrix PcaReduce(const EmbeddingMatrix& points, std::size_t p);

}  // namespace atlas

#endif  // ATLAS_GEOMETRY_H_
