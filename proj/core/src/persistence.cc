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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>

#include "atlas/errors.h"
#include "atlas/topology.h"

namespace atlas {
namespace {

using Index = std::uint32_t;

struct Simplex2 {
  double value;
  Index a, b, c;  // a < b < c

  bool operator==(const Simplex2& o) const {
    return a == o.a && b == o.b && c == o.c;
  }
};

bool FiltrationLess(const Simplex2& x, const Simplex2& y) {
  if (x.value != y.value) return x.value < y.value;
  if (x.a != y.a) return x.a < y.a;
  if (x.b != y.b) return x.b < y.b;
  return x.c < y.c;
}

struct FiltrationGreater {
  bool operator()(const Simplex2& x, const Simplex2& y) const {
    return FiltrationLess(y, x);
  }
};

using MinHeap =
    std::priority_queue<Simplex2, std::vector<Simplex2>, FiltrationGreater>;

struct EdgeEntry {
  double value;
  Index u, v;  // u < v
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t Find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool Union(std::size_t a, std::size_t b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return false;
    if (a < b) std::swap(a, b);
    parent_[a] = b;  // smaller index is the root
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

void ValidateDistance(const Eigen::MatrixXd& dist) {
  if (dist.rows() != dist.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "distance matrix is not square");
  }
  const auto n = dist.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dist(i, i) != 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "distance matrix has a non-zero diagonal at " +
                      std::to_string(i));
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double x = dist(i, j);
      if (std::isnan(x) || x < 0.0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "distance matrix has a negative or NaN entry at (" +
                        std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      if (x != dist(j, i)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "distance matrix is not symmetric at (" +
                        std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

std::vector<Index> SymmetricDifference(const std::vector<Index>& x,
                                       const std::vector<Index>& y) {
  std::vector<Index> out;
  out.reserve(x.size() + y.size());
  std::set_symmetric_difference(x.begin(), x.end(), y.begin(), y.end(),
                                std::back_inserter(out));
  return out;
}

class RipsComplex {
 public:
  RipsComplex(const Eigen::MatrixXd& dist, double threshold)
      : dist_(dist), threshold_(threshold),
        n_(static_cast<std::size_t>(dist.rows())), edge_id_(n_ * n_, -1) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double x = D(i, j);
        if (x != kUnreachable && x <= threshold) {
          edges_.push_back({x, static_cast<Index>(i), static_cast<Index>(j)});
        }
      }
    }
    std::sort(edges_.begin(), edges_.end(), [](const auto& x, const auto& y) {
      if (x.value != y.value) return x.value < y.value;
      if (x.u != y.u) return x.u < y.u;
      return x.v < y.v;
    });
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      edge_id_[edges_[e].u * n_ + edges_[e].v] = static_cast<std::int64_t>(e);
      edge_id_[edges_[e].v * n_ + edges_[e].u] = static_cast<std::int64_t>(e);
    }
  }

  double D(std::size_t i, std::size_t j) const {
    return dist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::size_t n() const { return n_; }
  const std::vector<EdgeEntry>& edges() const { return edges_; }
  std::int64_t EdgeId(std::size_t i, std::size_t j) const {
    return edge_id_[i * n_ + j];
  }

  std::uint64_t Key(const Simplex2& t) const {
    return (static_cast<std::uint64_t>(t.a) * n_ + t.b) * n_ + t.c;
  }

  void PushCoboundary(Index e, MinHeap& heap) const {
    const auto& edge = edges_[e];
    const double* du = dist_.col(edge.u).data();
    const double* dv = dist_.col(edge.v).data();
    for (std::size_t w = 0; w < n_; ++w) {
      if (w == edge.u || w == edge.v) continue;
      if (EdgeId(edge.u, w) < 0 || EdgeId(edge.v, w) < 0) continue;
      Index s[3] = {edge.u, edge.v, static_cast<Index>(w)};
      std::sort(std::begin(s), std::end(s));
      heap.push({std::max({edge.value, du[w], dv[w]}), s[0], s[1], s[2]});
    }
  }

  // Earliest coface of edge e, i.e. the pivot of its unreduced column.
  std::optional<Simplex2> MinCoface(Index e) const {
    const auto& edge = edges_[e];
    const double* du = dist_.col(edge.u).data();
    const double* dv = dist_.col(edge.v).data();
    std::optional<Simplex2> best;
    for (std::size_t w = 0; w < n_; ++w) {
      if (du[w] > threshold_ || dv[w] > threshold_) continue;
      if (w == edge.u || w == edge.v) continue;
      const double value = std::max({edge.value, du[w], dv[w]});
      if (best && value > best->value) continue;
      Index s[3] = {edge.u, edge.v, static_cast<Index>(w)};
      std::sort(std::begin(s), std::end(s));
      const Simplex2 t{value, s[0], s[1], s[2]};
      if (!best || FiltrationLess(t, *best)) best = t;
    }
    return best;
  }

  std::vector<Index> Boundary(const Simplex2& t) const {
    std::vector<Index> col = {static_cast<Index>(EdgeId(t.a, t.b)),
                              static_cast<Index>(EdgeId(t.a, t.c)),
                              static_cast<Index>(EdgeId(t.b, t.c))};
    std::sort(col.begin(), col.end());
    return col;
  }

 private:
  const Eigen::MatrixXd& dist_;
  double threshold_;
  std::size_t n_;
  std::vector<EdgeEntry> edges_;
  std::vector<std::int64_t> edge_id_;
};

// Pops cancelling pairs (GF(2)) and returns the smallest surviving entry.
std::optional<Simplex2> PopPivot(MinHeap& heap) {
  while (!heap.empty()) {
    Simplex2 top = heap.top();
    heap.pop();
    if (!heap.empty() && heap.top() == top) {
      heap.pop();
      continue;
    }
    heap.push(top);
    return top;
  }
  return std::nullopt;
}

double EnclosingRadius(const Eigen::MatrixXd& dist) {
  const std::size_t n = static_cast<std::size_t>(dist.rows());
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) !=
          kUnreachable) {
        uf.Union(i, j);
      }
    }
  }
  std::unordered_map<std::size_t, double> best;
  for (std::size_t v = 0; v < n; ++v) {
    double eccentricity = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x =
          dist(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j));
      if (x != kUnreachable) eccentricity = std::max(eccentricity, x);
    }
    auto [it, inserted] = best.try_emplace(uf.Find(v), eccentricity);
    if (!inserted) it->second = std::min(it->second, eccentricity);
  }
  double radius = 0.0;
  for (const auto& [root, r] : best) radius = std::max(radius, r);
  return radius;
}

// Edge `e` closed into a cycle through the forest of tree edges older than e.
std::vector<VertexPair> ForestCycle(const RipsComplex& cx,
                                    const std::vector<char>& tree_edge,
                                    Index e) {
  const std::size_t n = cx.n();
  std::vector<std::vector<std::size_t>> adj(n);
  for (Index f = 0; f < e; ++f) {
    if (!tree_edge[f]) continue;
    adj[cx.edges()[f].u].push_back(cx.edges()[f].v);
    adj[cx.edges()[f].v].push_back(cx.edges()[f].u);
  }
  const std::size_t src = cx.edges()[e].u;
  const std::size_t dst = cx.edges()[e].v;
  std::vector<std::size_t> prev(n, n);
  std::queue<std::size_t> q;
  q.push(src);
  prev[src] = src;
  while (!q.empty()) {
    const std::size_t x = q.front();
    q.pop();
    if (x == dst) break;
    for (std::size_t y : adj[x]) {
      if (prev[y] == n) {
        prev[y] = x;
        q.push(y);
      }
    }
  }
  std::vector<VertexPair> cycle = {{src, dst}};
  if (prev[dst] == n) return cycle;
  for (std::size_t x = dst; x != src; x = prev[x]) {
    cycle.emplace_back(std::min(x, prev[x]), std::max(x, prev[x]));
  }
  std::sort(cycle.begin(), cycle.end());
  return cycle;
}

}  // namespace

PersistenceDiagram RipsPersistence(const Eigen::MatrixXd& dist,
                                   const RipsOptions& options) {
  ValidateDistance(dist);
  PersistenceDiagram out;
  const std::size_t n = static_cast<std::size_t>(dist.rows());
  if (n == 0) return out;
  out.enclosing_radius = EnclosingRadius(dist);
  RipsComplex cx(dist, out.enclosing_radius);
  const auto& edges = cx.edges();
  out.edges = edges.size();
  const auto keep = [&](double birth, double death) {
    return options.include_zero_persistence || death > birth;
  };

  // H0 by union-find; merging edges are cleared from the H1 reduction.
  std::vector<char> tree_edge(edges.size(), 0);
  UnionFind uf(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (uf.Union(edges[e].u, edges[e].v)) {
      tree_edge[e] = 1;
      if (keep(0.0, edges[e].value)) {
        PersistencePair p;
        p.dimension = 0;
        p.birth = 0.0;
        p.death = edges[e].value;
        p.birth_edge = {edges[e].u, edges[e].v};
        out.h0.push_back(std::move(p));
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (uf.Find(v) == v) {
      PersistencePair p;
      p.dimension = 0;
      p.birth = 0.0;
      p.death = kUnreachable;
      out.h0.push_back(std::move(p));
    }
  }

  // H1 pairing: coboundary columns of positive edges in reverse filtration
  // order; the pivot of a column is its earliest triangle.
  struct FinitePair {
    Index edge;
    Simplex2 triangle;
  };
  std::vector<FinitePair> finite;
  std::vector<Index> essential;
  std::unordered_map<std::uint64_t, Index> pivot_owner;
  // Reduction columns that differ from the trivial {e}.
  std::unordered_map<Index, std::vector<Index>> reduction;
  const auto column_of = [&](Index e) {
    auto it = reduction.find(e);
    return it == reduction.end() ? std::vector<Index>{e} : it->second;
  };
  for (std::size_t r = edges.size(); r-- > 0;) {
    if (tree_edge[r]) continue;
    const auto e = static_cast<Index>(r);
    // Fast path: the unreduced pivot is free.
    const auto first = cx.MinCoface(e);
    if (!first) {
      essential.push_back(e);
      continue;
    }
    if (!pivot_owner.contains(cx.Key(*first))) {
      pivot_owner.emplace(cx.Key(*first), e);
      finite.push_back({e, *first});
      continue;
    }
    std::vector<Index> working = {e};
    MinHeap heap;
    cx.PushCoboundary(e, heap);
    while (true) {
      const auto pivot = PopPivot(heap);
      if (!pivot) {
        essential.push_back(e);
        break;
      }
      auto owner = pivot_owner.find(cx.Key(*pivot));
      if (owner == pivot_owner.end()) {
        pivot_owner.emplace(cx.Key(*pivot), e);
        finite.push_back({e, *pivot});
        if (working.size() > 1) reduction.emplace(e, std::move(working));
        break;
      }
      const auto other = column_of(owner->second);
      for (Index f : other) cx.PushCoboundary(f, heap);
      working = SymmetricDifference(working, other);
    }
  }
  pivot_owner.clear();
  reduction.clear();

  // Representatives: homology reduction over the death triangles only.
  std::sort(finite.begin(), finite.end(), [](const auto& x, const auto& y) {
    return FiltrationLess(x.triangle, y.triangle);
  });
  // Columns left equal to the plain boundary are not stored.
  std::vector<std::vector<Index>> reduced(finite.size());
  std::vector<std::int64_t> low_owner(edges.size(), -1);
  const auto column = [&](std::size_t c) {
    return reduced[c].empty() ? cx.Boundary(finite[c].triangle) : reduced[c];
  };
  for (std::size_t c = 0; c < finite.size(); ++c) {
    std::vector<Index> col = cx.Boundary(finite[c].triangle);
    bool touched = false;
    while (!col.empty() && low_owner[col.back()] >= 0) {
      col = SymmetricDifference(
          col, column(static_cast<std::size_t>(low_owner[col.back()])));
      touched = true;
    }
    if (col.empty() || col.back() != finite[c].edge) {
      throw Error(ErrorCode::kComputation,
                  "homology and cohomology pairings disagree");
    }
    low_owner[col.back()] = static_cast<std::int64_t>(c);
    if (touched) reduced[c] = std::move(col);
  }

  for (std::size_t c = 0; c < finite.size(); ++c) {
    const auto& edge = edges[finite[c].edge];
    const auto& tri = finite[c].triangle;
    if (!keep(edge.value, tri.value)) continue;
    PersistencePair p;
    p.dimension = 1;
    p.birth = edge.value;
    p.death = tri.value;
    p.birth_edge = {edge.u, edge.v};
    p.death_triangle = {tri.a, tri.b, tri.c};
    for (Index f : column(c)) {
      p.representative.emplace_back(edges[f].u, edges[f].v);
    }
    std::sort(p.representative.begin(), p.representative.end());
    out.h1.push_back(std::move(p));
  }
  for (Index e : essential) {
    PersistencePair p;
    p.dimension = 1;
    p.birth = edges[e].value;
    p.death = kUnreachable;
    p.birth_edge = {edges[e].u, edges[e].v};
    p.representative = ForestCycle(cx, tree_edge, e);
    out.h1.push_back(std::move(p));
  }
  std::stable_sort(out.h1.begin(), out.h1.end(),
                   [&](const auto& x, const auto& y) {
                     const auto ex = cx.EdgeId(x.birth_edge.first,
                                               x.birth_edge.second);
                     const auto ey = cx.EdgeId(y.birth_edge.first,
                                               y.birth_edge.second);
                     return ex < ey;
                   });
  return out;
}

std::vector<PersistencePair> RipsPersistenceH1(const Eigen::MatrixXd& dist,
                                               const RipsOptions& options) {
  return RipsPersistence(dist, options).h1;
}

}  // namespace atlas
