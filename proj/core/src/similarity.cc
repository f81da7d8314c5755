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

#include "atlas/similarity.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>

#include "atlas/errors.h"
#include "atlas/stats.h"

namespace atlas {

GaussianSummary GaussianMoments(std::string dataset,
                                const Eigen::MatrixXd& rows, double ridge) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (n < 2) {
    throw Error(ErrorCode::kInvalidInput,
                "dataset '" + dataset + "' has " + std::to_string(n) +
                    " samples; covariance needs at least 2");
  }
  GaussianSummary s;
  s.dataset = std::move(dataset);
  s.n = n;
  s.mu = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - s.mu.transpose();
  s.sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose()).eval();
  s.sigma.diagonal().array() += ridge;
  return s;
}

GaussianSummary DatasetMoments(const Corpus& corpus, std::string_view dataset,
                               const ReducedMatrix* space) {
  const auto rows = corpus.RowsOfDataset(dataset);
  if (rows.empty()) {
    throw Error(ErrorCode::kNotFound,
                "unknown dataset '" + std::string(dataset) + "'");
  }
  Eigen::MatrixXd points;
  if (space != nullptr) {
    points.resize(static_cast<Eigen::Index>(rows.size()), space->values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      points.row(static_cast<Eigen::Index>(i)) =
          space->values.row(static_cast<Eigen::Index>(rows[i]));
    }
  } else {
    points = corpus.embeddings().Select(rows).ToDouble();
  }
  return GaussianMoments(std::string(dataset), points);
}

Eigen::MatrixXd SymmetricSqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kComputation, "eigendecomposition failed");
  }
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() *
         eig.eigenvectors().transpose();
}

double TraceSqrtProduct(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd root_a = SymmetricSqrt(a);
  Eigen::MatrixXd inner = root_a * b * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner,
                                                     Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kComputation, "eigendecomposition failed");
  }
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

FrechetResult FrechetDistance(const GaussianSummary& a,
                              const GaussianSummary& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows()) {
    throw Error(ErrorCode::kInvalidArgument,
                "Frechet distance between summaries of dimension " +
                    std::to_string(a.mu.size()) + " and " +
                    std::to_string(b.mu.size()));
  }
  const double mean_term = (a.mu - b.mu).squaredNorm();
  const double trace_term = a.sigma.trace() + b.sigma.trace() -
                            2.0 * TraceSqrtProduct(a.sigma, b.sigma);
  const double raw = mean_term + trace_term;
  FrechetResult r;
  if (raw < 0.0) {
    r.clamped = -raw;
    r.distance = 0.0;
  } else {
    r.distance = raw;
  }
  return r;
}

SimilarityMatrix PairwiseFrechet(std::vector<GaussianSummary> summaries) {
  if (summaries.size() < 2) {
    throw Error(ErrorCode::kInvalidInput,
                "pairwise Frechet distance needs at least two datasets");
  }
  SimilarityMatrix sm;
  const auto m = static_cast<Eigen::Index>(summaries.size());
  sm.fd = Eigen::MatrixXd::Zero(m, m);
  sm.dims = static_cast<std::size_t>(summaries.front().mu.size());
  for (const auto& s : summaries) {
    sm.datasets.push_back(s.dataset);
    sm.counts.push_back(s.n);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto r = FrechetDistance(summaries[static_cast<std::size_t>(i)],
                                     summaries[static_cast<std::size_t>(j)]);
      sm.fd(i, j) = sm.fd(j, i) = r.distance;
      sm.max_clamped = std::max(sm.max_clamped, r.clamped);
    }
  }
  return sm;
}

SimilarityMatrix PairwiseFrechet(const Corpus& corpus, std::size_t reduce_to) {
  const bool reduce = reduce_to > 0 && reduce_to < corpus.dim() &&
                      reduce_to < corpus.size();
  std::optional<ReducedMatrix> space;
  if (reduce) space = PcaReduce(corpus.embeddings(), reduce_to);
  std::vector<GaussianSummary> summaries;
  std::vector<std::string> warnings;
  for (const auto& name : corpus.Datasets()) {
    const auto rows = corpus.RowsOfDataset(name);
    if (rows.size() < 2) {
      warnings.push_back("dataset '" + name + "' excluded: " +
                         std::to_string(rows.size()) + " sample(s)");
      continue;
    }
    summaries.push_back(
        DatasetMoments(corpus, name, space ? &*space : nullptr));
  }
  if (summaries.size() < 2) {
    throw Error(ErrorCode::kInvalidInput,
                "fewer than two datasets have at least two samples");
  }
  auto sm = PairwiseFrechet(std::move(summaries));
  sm.space = reduce ? "pca" : "full";
  sm.warnings = std::move(warnings);
  return sm;
}

std::vector<DatasetScore> UniquenessScores(const SimilarityMatrix& sm) {
  const auto m = static_cast<Eigen::Index>(sm.datasets.size());
  std::vector<DatasetScore> out;
  for (Eigen::Index i = 0; i < m; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i) sum += sm.fd(i, j);
    }
    out.push_back({sm.datasets[static_cast<std::size_t>(i)],
                   m > 1 ? sum / static_cast<double>(m - 1) : 0.0});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.dataset < b.dataset;
  });
  return out;
}

std::vector<OverlapPair> HighOverlapPairs(const SimilarityMatrix& sm,
                                          OverlapThreshold threshold) {
  const auto m = static_cast<Eigen::Index>(sm.datasets.size());
  std::vector<OverlapPair> all;
  std::vector<double> values;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      all.push_back({sm.datasets[static_cast<std::size_t>(i)],
                     sm.datasets[static_cast<std::size_t>(j)], sm.fd(i, j)});
      values.push_back(sm.fd(i, j));
    }
  }
  std::vector<OverlapPair> out;
  if (all.empty()) return out;
  if (threshold.kind == OverlapThreshold::Kind::kQuantile) {
    const double cut = Quantile(values, threshold.value);
    for (auto& p : all) {
      if (p.fd <= cut) out.push_back(p);
    }
  } else {
    for (auto& p : all) {
      if (p.fd < threshold.value) out.push_back(p);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& x, const auto& y) { return x.fd < y.fd; });
  return out;
}

}  // namespace atlas
