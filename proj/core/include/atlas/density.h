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

#ifndef ATLAS_DENSITY_H_
#define ATLAS_DENSITY_H_

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace atlas {

struct GmmOptions {
  std::size_t components = 16;
  std::uint64_t seed = 42;
  double tol = 1e-6;  // on the per-sample objective improvement
  std::size_t max_iter = 200;
  double ridge = 1e-6;
  int workers = 1;
};

// Full-covariance Gaussian mixture.
//
// The covariance update is Sigma_k = (S_k + ridge * I) / N_k, where S_k is
// the responsibility-weighted scatter and N_k the effective count. That is
// the exact maximiser of the log-likelihood plus the penalty
// -(ridge / 2) * sum_k tr(Sigma_k^{-1}), so EM increases this penalised
// objective monotonically; `objective_trace` records it per iteration and
// `log_likelihood_trace` the plain log-likelihood alongside.
struct GmmModel {
  std::size_t dim = 0;
  Eigen::VectorXd weights;                   // K, sums to 1
  Eigen::MatrixXd means;                     // K x p
  std::vector<Eigen::MatrixXd> covariances;  // K of p x p, SPD
  double ridge = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double final_log_likelihood = 0.0;
  std::vector<double> objective_trace;
  std::vector<double> log_likelihood_trace;

  std::size_t components() const {
    return static_cast<std::size_t>(weights.size());
  }
};

// k-means++ seeding from `seed`, then EM until the per-sample objective
// gain drops below tol or max_iter is reached. Throws Error(kInvalidInput)
// when n < K and Error(kComputation) on a non-finite likelihood.
GmmModel FitGmm(const Eigen::MatrixXd& points, const GmmOptions& options);

// Log mixture density per row, via log-sum-exp.
std::vector<double> LogDensity(const GmmModel& model,
                               const Eigen::MatrixXd& points);

// Number of free parameters, for BIC.
std::size_t GmmParameterCount(std::size_t components, std::size_t dim);

struct BicPoint {
  std::size_t components = 0;
  double bic = 0.0;
  double log_likelihood = 0.0;
};

// Fits every K in `candidates` (skipping K > n) and reports
// BIC = -2 log L + params * log n.
std::vector<BicPoint> BicSweep(const Eigen::MatrixXd& points,
                               std::span<const std::size_t> candidates,
                               const GmmOptions& options);

struct DensityReport {
  std::vector<double> log_density;
  double q_low = 0.025;
  double q_high = 0.975;
  double low_threshold = 0.0;
  double high_threshold = 0.0;
  std::vector<std::size_t> sparse_rows;
  std::vector<std::size_t> dense_rows;
  std::vector<std::string> sparse_ids;
  std::vector<std::string> dense_ids;
};

// Nearest-rank extremes. With m_low = ceil(q_low * n), the low threshold is
// the (m_low + 1)-th smallest score and a sample is sparse iff its score is
// strictly below it; dense mirrors this with m_high = ceil((1 - q_high) * n)
// from the top. Distinct scores therefore flag exactly m_low / m_high
// samples, and ties at a threshold are never flagged.
DensityReport DensityExtremes(std::span<const double> scores,
                              std::span<const std::string> ids,
                              double q_low = 0.025, double q_high = 0.975);

}  // namespace atlas

#endif  // ATLAS_DENSITY_H_
