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

#include "atlas/density.h"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "atlas/errors.h"
#include "atlas/parallel.h"
#include "atlas/rng.h"
#include "atlas/stats.h"

namespace atlas {
namespace {

struct ComponentCache {
  Eigen::LLT<Eigen::MatrixXd> chol;
  double log_norm = 0.0;  // log weight - 0.5 (p log 2pi + log det)
};

std::vector<ComponentCache> Factorize(const GmmModel& model) {
  const double p = static_cast<double>(model.dim);
  std::vector<ComponentCache> caches(model.components());
  for (std::size_t k = 0; k < caches.size(); ++k) {
    caches[k].chol.compute(model.covariances[k]);
    if (caches[k].chol.info() != Eigen::Success) {
      throw Error(ErrorCode::kComputation,
                  "covariance of component " + std::to_string(k) +
                      " is not positive definite");
    }
    const auto& l = caches[k].chol.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < model.covariances[k].rows(); ++i) {
      log_det += 2.0 * std::log(l(i, i));
    }
    const double w = model.weights(static_cast<Eigen::Index>(k));
    caches[k].log_norm =
        (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) -
        0.5 * (p * std::log(2.0 * std::numbers::pi) + log_det);
  }
  return caches;
}

// Per-row log joint densities log(w_k N(x | mu_k, Sigma_k)), n x K.
Eigen::MatrixXd LogJoint(const GmmModel& model,
                         const std::vector<ComponentCache>& caches,
                         const Eigen::MatrixXd& points, int workers) {
  const auto n = points.rows();
  const auto K = static_cast<Eigen::Index>(model.components());
  Eigen::MatrixXd out(n, K);
  ParallelFor(static_cast<std::size_t>(n), workers, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    for (Eigen::Index k = 0; k < K; ++k) {
      const Eigen::VectorXd diff =
          points.row(i).transpose() - model.means.row(k).transpose();
      const Eigen::VectorXd z =
          caches[static_cast<std::size_t>(k)].chol.matrixL().solve(diff);
      out(i, k) = caches[static_cast<std::size_t>(k)].log_norm -
                  0.5 * z.squaredNorm();
    }
  });
  return out;
}

double LogSumExp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

std::vector<std::size_t> KMeansPlusPlus(const Eigen::MatrixXd& points,
                                        std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  Rng rng = Rng::Substream(seed, {0x676d6dULL});
  std::vector<std::size_t> centers;
  centers.push_back(rng.UniformIndex(n));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    const auto c = static_cast<Eigen::Index>(centers.back());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dist =
          (points.row(static_cast<Eigen::Index>(i)) - points.row(c))
              .squaredNorm();
      d2[i] = std::min(d2[i], dist);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.Uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.UniformIndex(n);
    }
    centers.push_back(pick);
  }
  return centers;
}

}  // namespace

GmmModel FitGmm(const Eigen::MatrixXd& points, const GmmOptions& opt) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto p = static_cast<std::size_t>(points.cols());
  const std::size_t K = opt.components;
  if (K == 0) throw Error(ErrorCode::kInvalidArgument, "K must be positive");
  if (p == 0) throw Error(ErrorCode::kInvalidInput, "points have dimension 0");
  if (n < K) {
    throw Error(ErrorCode::kInvalidInput,
                "GMM with K=" + std::to_string(K) + " needs at least K points; got " +
                    std::to_string(n));
  }
  if (!points.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "GMM input has non-finite values");
  }
  const auto pe = static_cast<Eigen::Index>(p);
  const auto Ke = static_cast<Eigen::Index>(K);

  GmmModel model;
  model.dim = p;
  model.ridge = opt.ridge;
  model.weights = Eigen::VectorXd::Constant(Ke, 1.0 / static_cast<double>(K));
  model.means.resize(Ke, pe);
  const auto seeds = KMeansPlusPlus(points, K, opt.seed);
  for (std::size_t k = 0; k < K; ++k) {
    model.means.row(static_cast<Eigen::Index>(k)) =
        points.row(static_cast<Eigen::Index>(seeds[k]));
  }
  const Eigen::RowVectorXd global_mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - global_mean;
  Eigen::MatrixXd global_cov =
      centered.transpose() * centered / static_cast<double>(n);
  global_cov.diagonal().array() += opt.ridge;
  model.covariances.assign(K, global_cov);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(pe, pe);
  const double n_d = static_cast<double>(n);
  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0;; ++iter) {
    // E-step on the current parameters.
    const auto caches = Factorize(model);
    Eigen::MatrixXd resp = LogJoint(model, caches, points, opt.workers);
    double log_lik = 0.0;
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
      const double lse = LogSumExp(resp.row(i));
      log_lik += lse;
      resp.row(i) = (resp.row(i).array() - lse).exp();
    }
    double penalty = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      penalty += caches[k].chol.solve(eye).trace();
    }
    const double objective = log_lik - 0.5 * opt.ridge * penalty;
    if (!std::isfinite(log_lik) || !std::isfinite(objective)) {
      throw Error(ErrorCode::kComputation,
                  "non-finite GMM likelihood at iteration " +
                      std::to_string(iter));
    }
    model.objective_trace.push_back(objective);
    model.log_likelihood_trace.push_back(log_lik);
    model.final_log_likelihood = log_lik;
    model.iterations = iter;
    if (iter > 0 && (objective - previous) / n_d < opt.tol) {
      model.converged = true;
      break;
    }
    if (iter >= opt.max_iter) break;
    previous = objective;

    // M-step. Fixed summation order per component.
    const Eigen::VectorXd counts = resp.colwise().sum().transpose();
    for (std::size_t k = 0; k < K; ++k) {
      const auto ke = static_cast<Eigen::Index>(k);
      const double nk = counts(ke);
      if (nk < 1e-12) {
        // Dead component: weight 0, parameters frozen.
        model.weights(ke) = 0.0;
        continue;
      }
      model.weights(ke) = nk / n_d;
      const Eigen::RowVectorXd mean = (resp.col(ke).transpose() * points) / nk;
      model.means.row(ke) = mean;
      const Eigen::MatrixXd diff = points.rowwise() - mean;
      Eigen::MatrixXd scatter =
          diff.transpose() * resp.col(ke).asDiagonal() * diff;
      scatter = 0.5 * (scatter + scatter.transpose()).eval();
      model.covariances[k] = (scatter + opt.ridge * eye) / nk;
    }
    model.weights /= model.weights.sum();
  }
  return model;
}

std::vector<double> LogDensity(const GmmModel& model,
                               const Eigen::MatrixXd& points) {
  if (static_cast<std::size_t>(points.cols()) != model.dim) {
    throw Error(ErrorCode::kInvalidArgument,
                "points have dimension " + std::to_string(points.cols()) +
                    ", model expects " + std::to_string(model.dim));
  }
  const auto caches = Factorize(model);
  const Eigen::MatrixXd joint = LogJoint(model, caches, points, 1);
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = LogSumExp(joint.row(i));
  }
  return out;
}

std::size_t GmmParameterCount(std::size_t components, std::size_t dim) {
  return (components - 1) + components * dim +
         components * dim * (dim + 1) / 2;
}

std::vector<BicPoint> BicSweep(const Eigen::MatrixXd& points,
                               std::span<const std::size_t> candidates,
                               const GmmOptions& options) {
  std::vector<BicPoint> out;
  const auto n = static_cast<std::size_t>(points.rows());
  for (std::size_t K : candidates) {
    if (K == 0 || K > n) continue;
    GmmOptions opt = options;
    opt.components = K;
    const auto model = FitGmm(points, opt);
    const double params = static_cast<double>(
        GmmParameterCount(K, static_cast<std::size_t>(points.cols())));
    out.push_back({K,
                   -2.0 * model.final_log_likelihood +
                       params * std::log(static_cast<double>(n)),
                   model.final_log_likelihood});
  }
  return out;
}

DensityReport DensityExtremes(std::span<const double> scores,
                              std::span<const std::string> ids, double q_low,
                              double q_high) {
  if (scores.empty()) {
    throw Error(ErrorCode::kInvalidInput, "no density scores to threshold");
  }
  if (!ids.empty() && ids.size() != scores.size()) {
    throw Error(ErrorCode::kInvalidArgument, "ids and scores differ in length");
  }
  if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "quantiles must satisfy 0 <= q_low < q_high <= 1");
  }
  DensityReport r;
  r.q_low = q_low;
  r.q_high = q_high;
  r.log_density.assign(scores.begin(), scores.end());
  std::vector<double> sorted = r.log_density;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t m_low =
      std::min(CeilCount(q_low * static_cast<double>(n)), n - 1);
  const std::size_t m_high =
      std::min(CeilCount((1.0 - q_high) * static_cast<double>(n)), n - 1);
  r.low_threshold = sorted[m_low];
  r.high_threshold = sorted[n - 1 - m_high];
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i] < r.low_threshold) r.sparse_rows.push_back(i);
    if (scores[i] > r.high_threshold) r.dense_rows.push_back(i);
  }
  if (!ids.empty()) {
    for (auto i : r.sparse_rows) r.sparse_ids.push_back(ids[i]);
    for (auto i : r.dense_rows) r.dense_ids.push_back(ids[i]);
  }
  return r;
}

}  // namespace atlas
