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

#ifndef ATLAS_TOPOLOGY_H_
#define ATLAS_TOPOLOGY_H_

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/geometry.h"

namespace atlas {

using VertexPair = std::pair<std::size_t, std::size_t>;

// Undirected simple graph with labelled connected components.
struct KnnGraph {
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> adjacency;  // sorted neighbour lists
  std::vector<std::size_t> degrees;
  // Component label per vertex; components are numbered by smallest vertex.
  std::vector<std::size_t> component_of;
  std::vector<std::vector<std::size_t>> components;

  bool HasEdge(std::size_t i, std::size_t j) const;
  std::size_t EdgeCount() const;

  // Throws on self-loops or out-of-range vertices; duplicates are merged.
  static KnnGraph FromEdges(std::size_t n, std::span<const VertexPair> edges);
};

// Edge (i, j) iff j is among the k nearest neighbours of i or vice versa.
// Neighbour ties resolve to the lower row index. Requires 1 <= k <= n - 1.
KnnGraph BuildKnnGraph(const Eigen::MatrixXd& points, std::size_t k,
                       Metric metric = Metric::kEuclidean);

struct ComponentPseudoinverse {
  std::vector<std::size_t> vertices;  // global vertex ids, ascending
  Eigen::MatrixXd pinv;               // indexed by position in `vertices`
  std::size_t zero_eigenvalues = 0;
};

// Moore-Penrose pseudoinverse of L = D - A for each connected component.
// A connected Laplacian has the constant vector as its only null direction,
// so L+ = (L + J/m)^-1 - J/m is taken by Cholesky; if that factorization
// fails the eigendecomposition is used, with eigenvalues <= eps_rel *
// lambda_max treated as zero.
std::vector<ComponentPseudoinverse> LaplacianPseudoinverse(
    const KnnGraph& graph, double eps_rel = 1e-10);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// Naive effective resistance L+_ii + L+_jj - 2 L+_ij within each component;
// kUnreachable across components; exact zeros on the diagonal.
Eigen::MatrixXd EffectiveResistance(
    const KnnGraph& graph, std::span<const ComponentPseudoinverse> pinvs);

// Degree-corrected resistance
//   d - 1/d_i - 1/d_j + 2 A_ij / (d_i d_j) - A_ii / d_i^2 - A_jj / d_j^2
// off the diagonal. The diagonal is set to 0 (the formula is not a distance
// there) and unreachable pairs stay kUnreachable. Throws on a zero-degree
// vertex.
Eigen::MatrixXd CorrectedResistance(const Eigen::MatrixXd& naive,
                                    const KnnGraph& graph);

struct ResistanceMatrix {
  Eigen::MatrixXd naive;
  Eigen::MatrixXd corrected;
};

ResistanceMatrix ComputeResistance(const KnnGraph& graph,
                                   double eps_rel = 1e-10);

struct PersistencePair {
  int dimension = 1;
  double birth = 0.0;
  double death = kUnreachable;  // kUnreachable for essential classes
  VertexPair birth_edge{0, 0};  // dimension 1 only
  std::array<std::size_t, 3> death_triangle{0, 0, 0};
  // Representative 1-cycle as edges (u < v): the reduced boundary column of
  // the death triangle, or, for an essential class, the birth edge closed
  // through the spanning forest.
  std::vector<VertexPair> representative;

  double persistence() const { return death - birth; }
  bool essential() const { return death == kUnreachable; }
};

struct PersistenceDiagram {
  std::vector<PersistencePair> h0;
  std::vector<PersistencePair> h1;
  // Scale beyond which the complex is a cone on every component; simplices
  // above it are never enumerated.
  double enclosing_radius = 0.0;
  std::size_t edges = 0;
};

struct RipsOptions {
  bool include_zero_persistence = false;
};

// Vietoris-Rips persistence in dimensions 0 and 1 over the 2-skeleton.
//
// Simplices are ordered by filtration value, then lexicographically by
// sorted vertex tuple. H1 pairs come from a cohomology reduction over the
// positive edges (tree edges cleared), and each finite pair's representative
// cycle from the homology reduction restricted to death triangles, which
// yields the same columns as the full boundary-matrix reduction.
//
// kUnreachable entries mark pairs that are never joined by an edge. Throws
// Error(kInvalidArgument) on asymmetric, negative, NaN, or non-zero diagonal
// input.
PersistenceDiagram RipsPersistence(const Eigen::MatrixXd& dist,
                                   const RipsOptions& options = {});

// H1 pairs only.
std::vector<PersistencePair> RipsPersistenceH1(const Eigen::MatrixXd& dist,
                                               const RipsOptions& options = {});

// pi^{d/2} / Gamma(d/2 + 1) * r^d, and its logarithm for large d.
double HypersphereVolume(std::size_t dim, double radius);
double LogHypersphereVolume(std::size_t dim, double radius);

struct Hole {
  std::size_t rank = 0;       // 1-based, by persistence descending
  std::size_t component = 0;  // graph component the class lives in
  double birth = 0.0;
  double death = 0.0;
  double persistence = 0.0;
  std::vector<VertexPair> representative;  // point rows
  std::vector<std::size_t> vertices;       // point rows, ascending
  Eigen::VectorXd center;
  std::size_t size = 0;
  double radius = 0.0;  // median distance of vertices to the center
  std::size_t volume_dim = 0;
  double volume = 0.0;
  double log_volume = 0.0;
  std::vector<std::size_t> boundary_rows;
};

// Top `k_top` pairs by persistence (ties: earlier birth, then birth edge) with
// geometry taken from `points` rows. Representative vertex ids in `pairs`
// must index rows of `points`. Returns all pairs when fewer exist.
std::vector<Hole> TopHoles(std::span<const PersistencePair> pairs,
                           const Eigen::MatrixXd& points, std::size_t k_top);

// Union over hole vertices of their k_b nearest neighbours (Euclidean, self
// excluded), kept when within alpha times the median k_b-th neighbour
// distance of the hole vertices; hole vertices are always included. k_b is
// clamped to n - 1. Rows ascending.
std::vector<std::size_t> BoundaryPoints(const Hole& hole,
                                        const Eigen::MatrixXd& points,
                                        std::size_t k_b, double alpha);

std::vector<std::string> BoundaryPointIds(const Hole& hole,
                                          const Eigen::MatrixXd& points,
                                          std::span<const std::string> ids,
                                          std::size_t k_b, double alpha);

struct HoleOptions {
  std::size_t graph_k = 15;
  double eps_rel = 1e-10;
  bool corrected = true;
  bool include_zero_persistence = false;
  std::size_t k_top = 5;
  std::size_t k_b = 20;
  double alpha = 1.5;
  std::size_t max_points = 2000;
  std::uint64_t seed = 42;
};

struct HoleAnalysis {
  std::vector<Hole> holes;
  std::vector<PersistencePair> pairs;  // all reported H1 pairs, point rows
  std::size_t n_points = 0;
  std::size_t n_used = 0;
  bool subsampled = false;
  std::size_t dim = 0;
  std::size_t n_components = 0;
  std::size_t clamped_negative = 0;  // corrected entries raised to 0
  std::vector<std::string> notes;
};

// kNN graph -> resistance (corrected unless disabled) -> per-component
// Rips H1 -> top holes with boundary points. Inputs above max_points are
// uniformly subsampled with `seed`; boundary points always come from the
// full point set.
HoleAnalysis DetectHoles(const Eigen::MatrixXd& points,
                         const HoleOptions& options);

struct WordCount {
  std::string word;
  std::size_t count = 0;
};

// Lower-cased alphanumeric tokens of the label field over the given rows,
// most frequent first (ties alphabetical).
std::vector<WordCount> LabelWordFrequencies(const Corpus& corpus,
                                            std::span<const std::size_t> rows);

}  // namespace atlas

#endif  // ATLAS_TOPOLOGY_H_
