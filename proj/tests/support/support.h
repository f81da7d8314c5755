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


// Seeded generators shared by the unit, property and acceptance tests.

#ifndef ATLAS_TESTS_SUPPORT_H_
#define ATLAS_TESTS_SUPPORT_H_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/rng.h"

namespace atlas::testing {

inline std::filesystem::path SourceDir() { return ATLAS_SOURCE_DIR; }

inline std::filesystem::path FixtureDir(const std::string& name) {
  return SourceDir() / "fixtures" / name;
}

// Fresh empty directory under the build tree.
inline std::filesystem::path ScratchDir(const std::string& name) {
  auto dir = std::filesystem::path(ATLAS_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<std::uint8_t> ReadBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> Gaussian(Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> v(d);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

inline std::vector<double> UnitVector(Rng& rng, std::size_t d) {
  auto v = Gaussian(rng, d);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Builds a corpus from raw rows, normalizing them first.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::size_t dim) : dim_(dim) {}

  MetadataRecord& Add(const std::vector<double>& row, std::string dataset,
                      std::optional<int> year = std::nullopt) {
    for (double x : row) values_.push_back(static_cast<float>(x));
    MetadataRecord r;
    r.id = dataset + "-" + std::to_string(records_.size());
    r.dataset = std::move(dataset);
    r.year = year;
    records_.push_back(std::move(r));
    return records_.back();
  }

  std::size_t size() const { return records_.size(); }

  Corpus Build() const {
    EmbeddingMatrix m(records_.size(), dim_, values_);
    return Corpus::Create(NormalizeRows(m), records_, true);
  }

 private:
  std::size_t dim_;
  std::vector<float> values_;
  std::vector<MetadataRecord> records_;
};

// Random connected simple graph: a random spanning tree plus extra edges,
// each present with probability p.
inline std::vector<std::pair<std::size_t, std::size_t>> RandomConnectedGraph(
    Rng& rng, std::size_t n, double p) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<bool>> has(n, std::vector<bool>(n, false));
  for (std::size_t v = 1; v < n; ++v) {
    const std::size_t u = rng.UniformIndex(v);
    edges.emplace_back(u, v);
    has[u][v] = has[v][u] = true;
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (!has[u][v] && rng.Uniform() < p) {
        edges.emplace_back(u, v);
        has[u][v] = has[v][u] = true;
      }
    }
  }
  return edges;
}

// Pairwise Euclidean distances of the rows, exactly symmetric.
inline Eigen::MatrixXd EuclideanDistances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

inline Eigen::MatrixXd RandomPoints(Rng& rng, std::size_t n, std::size_t d) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = rng.Uniform();
  }
  return p;
}

inline Eigen::MatrixXd RandomSpd(Rng& rng, std::size_t d, double ridge = 0.1) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.Normal();
  }
  Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(d);
  s.diagonal().array() += ridge;
  return s;
}

}  // namespace atlas::testing

#endif  // ATLAS_TESTS_SUPPORT_H_
