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

#include "atlas/topology.h"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "atlas/errors.h"
#include "atlas/rng.h"
#include "atlas/stats.h"

namespace atlas {
namespace {

void LabelComponents(KnnGraph& g) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  g.component_of.assign(g.n, kNone);
  g.components.clear();
  for (std::size_t s = 0; s < g.n; ++s) {
    if (g.component_of[s] != kNone) continue;
    const std::size_t label = g.components.size();
    std::vector<std::size_t> members;
    std::queue<std::size_t> q;
    q.push(s);
    g.component_of[s] = label;
    while (!q.empty()) {
      const std::size_t x = q.front();
      q.pop();
      members.push_back(x);
      for (std::size_t y : g.adjacency[x]) {
        if (g.component_of[y] == kNone) {
          g.component_of[y] = label;
          q.push(y);
        }
      }
    }
    std::sort(members.begin(), members.end());
    g.components.push_back(std::move(members));
  }
}

Eigen::MatrixXd ComponentLaplacian(const KnnGraph& g,
                                   const std::vector<std::size_t>& vertices) {
  const auto m = static_cast<Eigen::Index>(vertices.size());
  std::vector<std::size_t> local(g.n, 0);
  for (std::size_t i = 0; i < vertices.size(); ++i) local[vertices[i]] = i;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const auto li = static_cast<Eigen::Index>(i);
    lap(li, li) = static_cast<double>(g.degrees[vertices[i]]);
    for (std::size_t y : g.adjacency[vertices[i]]) {
      lap(li, static_cast<Eigen::Index>(local[y])) = -1.0;
    }
  }
  return lap;
}

Eigen::MatrixXd EigenPseudoinverse(const Eigen::MatrixXd& lap, double eps_rel,
                                   std::size_t* zeros) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kComputation,
                "Laplacian eigendecomposition did not converge");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = eps_rel * std::max(lambda.maxCoeff(), 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  *zeros = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) {
      inv(i) = 1.0 / lambda(i);
    } else {
      ++*zeros;
    }
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return v * inv.asDiagonal() * v.transpose();
}

double PointDistance(const Eigen::MatrixXd& points, std::size_t i,
                     const Eigen::VectorXd& c) {
  return (points.row(static_cast<Eigen::Index>(i)).transpose() - c).norm();
}

}  // namespace

bool KnnGraph::HasEdge(std::size_t i, std::size_t j) const {
  if (i >= n || j >= n) return false;
  return std::binary_search(adjacency[i].begin(), adjacency[i].end(), j);
}

std::size_t KnnGraph::EdgeCount() const {
  std::size_t total = 0;
  for (std::size_t d : degrees) total += d;
  return total / 2;
}

KnnGraph KnnGraph::FromEdges(std::size_t n, std::span<const VertexPair> edges) {
  KnnGraph g;
  g.n = n;
  g.adjacency.assign(n, {});
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "edge (" + std::to_string(a) + ", " + std::to_string(b) +
                      ") is out of range for " + std::to_string(n) +
                      " vertices");
    }
    if (a == b) {
      throw Error(ErrorCode::kInvalidArgument,
                  "self-loop at vertex " + std::to_string(a));
    }
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
  }
  g.degrees.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& adj = g.adjacency[i];
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    g.degrees[i] = adj.size();
  }
  LabelComponents(g);
  return g;
}

KnnGraph BuildKnnGraph(const Eigen::MatrixXd& points, std::size_t k,
                       Metric metric) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2 || k < 1 || k > n - 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "graph_k=" + std::to_string(k) + " must lie in [1, " +
                    std::to_string(n < 1 ? 0 : n - 1) + "] for " +
                    std::to_string(n) + " points");
  }
  const auto rows = AllRows(n);
  KnnOptions opts;
  opts.k = k;
  opts.exclude_self = true;
  opts.metric = metric;
  const auto lists = Knn(points, rows, rows, opts);
  std::vector<VertexPair> edges;
  edges.reserve(n * k);
  for (const auto& list : lists) {
    for (const auto& nb : list.neighbors) {
      edges.emplace_back(list.query_index, nb.index);
    }
  }
  return KnnGraph::FromEdges(n, edges);
}

std::vector<ComponentPseudoinverse> LaplacianPseudoinverse(
    const KnnGraph& graph, double eps_rel) {
  std::vector<ComponentPseudoinverse> out;
  out.reserve(graph.components.size());
  for (const auto& vertices : graph.components) {
    ComponentPseudoinverse c;
    c.vertices = vertices;
    const Eigen::MatrixXd lap = ComponentLaplacian(graph, vertices);
    const auto m = lap.rows();
    const Eigen::MatrixXd j =
        Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
    Eigen::LLT<Eigen::MatrixXd> llt(lap + j);
    if (llt.info() == Eigen::Success) {
      c.pinv = llt.solve(Eigen::MatrixXd::Identity(m, m)) - j;
      c.zero_eigenvalues = 1;
    } else {
      c.pinv = EigenPseudoinverse(lap, eps_rel, &c.zero_eigenvalues);
    }
    out.push_back(std::move(c));
  }
  return out;
}

Eigen::MatrixXd EffectiveResistance(
    const KnnGraph& graph, std::span<const ComponentPseudoinverse> pinvs) {
  const auto n = static_cast<Eigen::Index>(graph.n);
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(n, n, kUnreachable);
  for (const auto& c : pinvs) {
    const auto m = static_cast<Eigen::Index>(c.vertices.size());
    for (Eigen::Index b = 0; b < m; ++b) {
      const auto gb = static_cast<Eigen::Index>(c.vertices[b]);
      for (Eigen::Index a = 0; a < m; ++a) {
        const auto ga = static_cast<Eigen::Index>(c.vertices[a]);
        const double x = c.pinv(a, a) + c.pinv(b, b) - 2.0 * c.pinv(a, b);
        r(ga, gb) = a == b ? 0.0 : std::max(x, 0.0);
      }
    }
  }
  // Enforce exact symmetry against rounding in the pseudoinverse.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double x = 0.5 * (r(i, j) + r(j, i));
      r(i, j) = r(j, i) = std::isnan(x) ? kUnreachable : x;
    }
  }
  return r;
}

Eigen::MatrixXd CorrectedResistance(const Eigen::MatrixXd& naive,
                                    const KnnGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.n);
  if (naive.rows() != n || naive.cols() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                "resistance matrix does not match the graph size");
  }
  for (std::size_t i = 0; i < graph.n; ++i) {
    if (graph.degrees[i] == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "vertex " + std::to_string(i) +
                      " has degree 0; corrected resistance is undefined");
    }
  }
  // Upper triangle mirrored, so the result is exactly symmetric.
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double dj = static_cast<double>(graph.degrees[j]);
    for (Eigen::Index i = 0; i < j; ++i) {
      double v = kUnreachable;
      if (naive(i, j) != kUnreachable) {
        const double di = static_cast<double>(graph.degrees[i]);
        const double a = graph.HasEdge(static_cast<std::size_t>(i),
                                       static_cast<std::size_t>(j))
                             ? 1.0
                             : 0.0;
        v = naive(i, j) - 1.0 / di - 1.0 / dj + 2.0 * a / (di * dj);
      }
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

ResistanceMatrix ComputeResistance(const KnnGraph& graph, double eps_rel) {
  ResistanceMatrix r;
  const auto pinvs = LaplacianPseudoinverse(graph, eps_rel);
  r.naive = EffectiveResistance(graph, pinvs);
  r.corrected = CorrectedResistance(r.naive, graph);
  return r;
}

double LogHypersphereVolume(std::size_t dim, double radius) {
  const double d = static_cast<double>(dim);
  return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0) +
         d * std::log(radius);
}

double HypersphereVolume(std::size_t dim, double radius) {
  if (dim == 0) return 1.0;
  if (radius == 0.0) return 0.0;
  return std::exp(LogHypersphereVolume(dim, radius));
}

std::vector<Hole> TopHoles(std::span<const PersistencePair> pairs,
                           const Eigen::MatrixXd& points, std::size_t k_top) {
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x,
                                                   std::size_t y) {
    const auto& a = pairs[x];
    const auto& b = pairs[y];
    if (a.persistence() != b.persistence()) {
      return a.persistence() > b.persistence();
    }
    if (a.birth != b.birth) return a.birth < b.birth;
    return a.birth_edge < b.birth_edge;
  });
  order.resize(std::min(order.size(), k_top));

  std::vector<Hole> holes;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& p = pairs[order[r]];
    Hole h;
    h.rank = r + 1;
    h.birth = p.birth;
    h.death = p.death;
    h.persistence = p.persistence();
    h.representative = p.representative;
    std::set<std::size_t> vs;
    for (const auto& [a, b] : p.representative) {
      vs.insert(a);
      vs.insert(b);
    }
    h.vertices.assign(vs.begin(), vs.end());
    for (std::size_t v : h.vertices) {
      if (v >= static_cast<std::size_t>(points.rows())) {
        throw Error(ErrorCode::kInvalidArgument,
                    "hole vertex " + std::to_string(v) +
                        " is out of range for the point matrix");
      }
    }
    h.size = h.vertices.size();
    h.volume_dim = static_cast<std::size_t>(points.cols());
    h.center = Eigen::VectorXd::Zero(points.cols());
    if (h.size > 0) {
      for (std::size_t v : h.vertices) {
        h.center += points.row(static_cast<Eigen::Index>(v)).transpose();
      }
      h.center /= static_cast<double>(h.size);
      std::vector<double> radii;
      radii.reserve(h.size);
      for (std::size_t v : h.vertices) {
        radii.push_back(PointDistance(points, v, h.center));
      }
      h.radius = Median(radii);
    }
    h.volume = HypersphereVolume(h.volume_dim, h.radius);
    h.log_volume = LogHypersphereVolume(h.volume_dim, h.radius);
    holes.push_back(std::move(h));
  }
  return holes;
}

std::vector<std::size_t> BoundaryPoints(const Hole& hole,
                                        const Eigen::MatrixXd& points,
                                        std::size_t k_b, double alpha) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (hole.vertices.empty()) return {};
  if (alpha <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "boundary alpha must be > 0");
  }
  k_b = std::min(k_b, n - 1);
  std::set<std::size_t> out(hole.vertices.begin(), hole.vertices.end());
  if (k_b == 0) return {out.begin(), out.end()};
  KnnOptions opts;
  opts.k = k_b;
  opts.exclude_self = true;
  opts.metric = Metric::kEuclidean;
  const auto rows = AllRows(n);
  const auto lists = Knn(points, hole.vertices, rows, opts);
  std::vector<double> kth;
  kth.reserve(lists.size());
  for (const auto& l : lists) kth.push_back(l.neighbors.back().distance);
  const double cutoff = alpha * Median(kth);
  for (const auto& l : lists) {
    for (const auto& nb : l.neighbors) {
      if (nb.distance <= cutoff) out.insert(nb.index);
    }
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> BoundaryPointIds(const Hole& hole,
                                          const Eigen::MatrixXd& points,
                                          std::span<const std::string> ids,
                                          std::size_t k_b, double alpha) {
  if (ids.size() != static_cast<std::size_t>(points.rows())) {
    throw Error(ErrorCode::kInvalidArgument,
                "id count does not match the point matrix");
  }
  std::vector<std::string> out;
  for (std::size_t r : BoundaryPoints(hole, points, k_b, alpha)) {
    out.push_back(ids[r]);
  }
  return out;
}

HoleAnalysis DetectHoles(const Eigen::MatrixXd& points,
                         const HoleOptions& options) {
  HoleAnalysis out;
  out.n_points = static_cast<std::size_t>(points.rows());
  out.dim = static_cast<std::size_t>(points.cols());
  if (options.max_points < 3) {
    throw Error(ErrorCode::kInvalidArgument, "max_points must be >= 3");
  }
  std::vector<std::size_t> used = AllRows(out.n_points);
  if (out.n_points > options.max_points) {
    // Partial Fisher-Yates; the selection is then put back in row order.
    Rng rng = Rng::Substream(options.seed, {0x686f6c6573});
    for (std::size_t i = 0; i < options.max_points; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.UniformIndex(out.n_points - i));
      std::swap(used[i], used[j]);
    }
    used.resize(options.max_points);
    std::sort(used.begin(), used.end());
    out.subsampled = true;
    out.notes.push_back("subsampled " + std::to_string(options.max_points) +
                        " of " + std::to_string(out.n_points) + " points");
  }
  out.n_used = used.size();
  if (out.n_used < 3) {
    out.notes.push_back("fewer than 3 points; no 1-cycles possible");
    return out;
  }
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(used.size()), points.cols());
  for (std::size_t i = 0; i < used.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) =
        points.row(static_cast<Eigen::Index>(used[i]));
  }
  std::size_t k = options.graph_k;
  if (k > out.n_used - 1) {
    k = out.n_used - 1;
    out.notes.push_back("graph_k clamped to " + std::to_string(k));
  }
  const KnnGraph graph = BuildKnnGraph(sub, k, Metric::kEuclidean);
  out.n_components = graph.components.size();
  const ResistanceMatrix res = ComputeResistance(graph, options.eps_rel);
  Eigen::MatrixXd dist = options.corrected ? res.corrected : res.naive;
  for (Eigen::Index j = 0; j < dist.cols(); ++j) {
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      if (dist(i, j) < 0.0) {
        dist(i, j) = 0.0;
        if (i < j) ++out.clamped_negative;
      }
    }
  }
  if (out.clamped_negative > 0) {
    out.notes.push_back(std::to_string(out.clamped_negative) +
                        " negative corrected resistances clamped to 0");
  }

  RipsOptions rips;
  rips.include_zero_persistence = options.include_zero_persistence;
  std::map<VertexPair, std::size_t> component_of_edge;
  for (std::size_t c = 0; c < graph.components.size(); ++c) {
    const auto& vs = graph.components[c];
    if (vs.size() < 3) continue;
    const auto m = static_cast<Eigen::Index>(vs.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index b = 0; b < m; ++b) {
      for (Eigen::Index a = 0; a < m; ++a) {
        block(a, b) = dist(static_cast<Eigen::Index>(vs[a]),
                           static_cast<Eigen::Index>(vs[b]));
      }
    }
    for (auto p : RipsPersistenceH1(block, rips)) {
      const auto to_row = [&](std::size_t local) { return used[vs[local]]; };
      p.birth_edge = {to_row(p.birth_edge.first), to_row(p.birth_edge.second)};
      for (auto& x : p.death_triangle) x = to_row(x);
      for (auto& [a, b] : p.representative) {
        a = to_row(a);
        b = to_row(b);
      }
      component_of_edge[p.birth_edge] = c;
      out.pairs.push_back(std::move(p));
    }
  }
  out.holes = TopHoles(out.pairs, points, options.k_top);
  for (auto& h : out.holes) {
    const auto& src = *std::find_if(
        out.pairs.begin(), out.pairs.end(), [&](const PersistencePair& p) {
          return p.representative == h.representative && p.birth == h.birth &&
                 p.death == h.death;
        });
    h.component = component_of_edge.at(src.birth_edge);
    h.boundary_rows = BoundaryPoints(h, points, options.k_b, options.alpha);
  }
  return out;
}

std::vector<WordCount> LabelWordFrequencies(const Corpus& corpus,
                                            std::span<const std::size_t> rows) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t r : rows) {
    const auto& label = corpus.record(r).label;
    if (!label) continue;
    std::string word;
    for (char ch : *label + " ") {
      const auto u = static_cast<unsigned char>(ch);
      if (std::isalnum(u)) {
        word.push_back(static_cast<char>(std::tolower(u)));
      } else if (!word.empty()) {
        ++counts[word];
        word.clear();
      }
    }
  }
  std::vector<WordCount> out;
  for (auto& [w, c] : counts) out.push_back({w, c});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.count > b.count;
  });
  return out;
}

}  // namespace atlas
