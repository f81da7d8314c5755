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

#ifndef ATLAS_SIMILARITY_H_
#define ATLAS_SIMILARITY_H_

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/geometry.h"

namespace atlas {

inline constexpr double kCovarianceRidge = 1e-6;

struct GaussianSummary {
  std::string dataset;
  std::size_t n = 0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // unbiased covariance plus ridge * I
};

// Mean and 1/(n-1) covariance of the rows, with `ridge` added to the
// diagonal. Requires n >= 2.
GaussianSummary GaussianMoments(std::string dataset,
                                const Eigen::MatrixXd& rows,
                                double ridge = kCovarianceRidge);

// Moments of one dataset's normalized embeddings, optionally in a shared
// reduced space (pass nullptr for the full embedding space).
GaussianSummary DatasetMoments(const Corpus& corpus, std::string_view dataset,
                               const ReducedMatrix* space = nullptr);

// Principal square root of a symmetric PSD matrix; negative eigenvalues
// from roundoff are clamped to zero.
Eigen::MatrixXd SymmetricSqrt(const Eigen::MatrixXd& m);

// Tr((A B)^{1/2}) computed as Tr((A^{1/2} B A^{1/2})^{1/2}), which keeps every
// decomposition symmetric.
double TraceSqrtProduct(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct FrechetResult {
  double distance = 0.0;  // clamped at 0
  double clamped = 0.0;   // magnitude of a negative roundoff result, or 0
};

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
FrechetResult FrechetDistance(const GaussianSummary& a,
                              const GaussianSummary& b);

struct SimilarityMatrix {
  std::vector<std::string> datasets;
  std::vector<std::size_t> counts;
  Eigen::MatrixXd fd;  // symmetric, zero diagonal
  std::size_t dims = 0;
  std::string space;   // "full" or "pca"
  double max_clamped = 0.0;
  std::vector<std::string> warnings;
};

SimilarityMatrix PairwiseFrechet(std::vector<GaussianSummary> summaries);

// All datasets with n >= 2 (others excluded with a warning). reduce_to == 0
// or >= the embedding dimension uses the full space; otherwise a PCA fitted
// on the whole corpus. Throws when fewer than two datasets are eligible.
SimilarityMatrix PairwiseFrechet(const Corpus& corpus, std::size_t reduce_to);

struct DatasetScore {
  std::string dataset;
  double score = 0.0;
};

// Mean off-diagonal FD per dataset, highest first.
std::vector<DatasetScore> UniquenessScores(const SimilarityMatrix& sm);

struct OverlapThreshold {
  enum class Kind { kAbsolute, kQuantile };
  Kind kind = Kind::kQuantile;
  double value = 0.05;

  static OverlapThreshold Absolute(double fd) {
    return {Kind::kAbsolute, fd};
  }
  static OverlapThreshold AtQuantile(double q) {
    return {Kind::kQuantile, q};
  }
};

struct OverlapPair {
  std::string a;
  std::string b;
  double fd = 0.0;
};

// Absolute: pairs with fd < value. Quantile: pairs with fd <= the q-quantile
// of the off-diagonal entries. Sorted ascending by fd.
std::vector<OverlapPair> HighOverlapPairs(const SimilarityMatrix& sm,
                                          OverlapThreshold threshold);

}  // namespace atlas

#endif  // ATLAS_SIMILARITY_H_
