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


// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Every expected value comes from an oracle in tests/oracles or
// from a closed form.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/density.h"
#include "atlas/errors.h"
#include "atlas/novelty.h"
#include "atlas/probes.h"
#include "atlas/report.h"
#include "atlas/retrieval.h"
#include "atlas/rng.h"
#include "atlas/similarity.h"
#include "atlas/topology.h"
#include "cli.h"
#include "oracles/oracles.h"
#include "support/support.h"

namespace {

using namespace atlas;
using atlas::testing::CorpusBuilder;
using nlohmann::json;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED: " + what);
    }
  }
  void Note(const std::string& s) { notes.push_back(s); }
};

std::string Fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

struct GraphCase {
  std::size_t n;
  Edges edges;
};

bool Connected(std::size_t n, const Edges& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack = {0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

// Every connected labelled graph on 2..6 vertices, then 100 random
// connected graphs on up to 12.
const std::vector<GraphCase>& GraphSuite() {
  static const std::vector<GraphCase> suite = [] {
    std::vector<GraphCase> out;
    for (std::size_t n = 2; n <= 6; ++n) {
      Edges all;
      for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) all.emplace_back(u, v);
      }
      for (std::uint64_t mask = 1; mask < (1ULL << all.size()); ++mask) {
        Edges e;
        for (std::size_t b = 0; b < all.size(); ++b) {
          if (mask >> b & 1) e.push_back(all[b]);
        }
        if (Connected(n, e)) out.push_back({n, std::move(e)});
      }
    }
    Rng rng(1001);
    for (int g = 0; g < 100; ++g) {
      const std::size_t n = 2 + rng.UniformIndex(11);
      const double p = 0.05 + 0.5 * rng.Uniform();
      out.push_back({n, atlas::testing::RandomConnectedGraph(rng, n, p)});
    }
    return out;
  }();
  return suite;
}

double MaxAbsDiff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Outcome Criterion1() {
  Outcome o;
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t exhaustive = 0;
  while (GraphSuite()[exhaustive].n <= 6 &&
         exhaustive + 100 < GraphSuite().size()) {
    ++exhaustive;
  }
  for (const auto& g : GraphSuite()) {
    const KnnGraph graph = KnnGraph::FromEdges(g.n, g.edges);
    const Eigen::MatrixXd got = ComputeResistance(graph).naive;
    const Eigen::MatrixXd want =
        oracle::DenseResistance(oracle::Adjacency(g.n, g.edges));
    worst = std::max(worst, MaxAbsDiff(got, want));
  }
  o.Require(worst <= 1e-8, "max |naive - oracle| = " + Fmt(worst));
  const auto naive = [](std::size_t n, Edges e) {
    return ComputeResistance(KnnGraph::FromEdges(n, e)).naive;
  };
  const double tri = naive(3, {{0, 1}, {1, 2}, {0, 2}})(0, 1);
  const double edge = naive(2, {{0, 1}})(0, 1);
  const double path = naive(3, {{0, 1}, {1, 2}})(0, 2);
  o.Require(std::abs(tri - 2.0 / 3.0) <= 1e-10, "triangle pair " + Fmt(tri));
  o.Require(std::abs(edge - 1.0) <= 1e-10, "single edge " + Fmt(edge));
  o.Require(std::abs(path - 2.0) <= 1e-10, "3-path endpoints " + Fmt(path));
  const double secs = Seconds(start);
  o.Require(secs < 10.0, "runtime " + Fmt(secs) + " s");
  o.Note(std::to_string(exhaustive) + " exhaustive + " +
         std::to_string(GraphSuite().size() - exhaustive) +
         " random graphs, max err " + Fmt(worst) + ", " + Fmt(secs) + " s");
  return o;
}

Outcome Criterion2() {
  Outcome o;
  double worst = 0.0;
  for (const auto& g : GraphSuite()) {
    const Eigen::MatrixXd a = oracle::Adjacency(g.n, g.edges);
    const KnnGraph graph = KnnGraph::FromEdges(g.n, g.edges);
    const Eigen::MatrixXd got = ComputeResistance(graph).corrected;
    const Eigen::MatrixXd want =
        oracle::PluginCorrected(oracle::DenseResistance(a), a);
    worst = std::max(worst, MaxAbsDiff(got, want));
  }
  o.Require(worst <= 1e-10, "max |corrected - plug-in| = " + Fmt(worst));
  const double k3 = ComputeResistance(
                        KnnGraph::FromEdges(3, Edges{{0, 1}, {1, 2}, {0, 2}}))
                        .corrected(0, 1);
  o.Require(std::abs(k3 - 1.0 / 6.0) <= 1e-10, "K3 pair " + Fmt(k3));
  o.Note(std::to_string(GraphSuite().size()) + " graphs, max err " +
         Fmt(worst) + ", K3 pair " + Fmt(k3));
  return o;
}

std::vector<oracle::BirthDeath> FinitePairs(
    const std::vector<PersistencePair>& pairs) {
  std::vector<oracle::BirthDeath> out;
  for (const auto& p : pairs) {
    if (!p.essential() && p.death > p.birth) out.push_back({p.birth, p.death});
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome Criterion3() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(3003);
  std::size_t total_pairs = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 4 + rng.UniformIndex(22);
    const std::size_t dim = 2 + rng.UniformIndex(2);
    const Eigen::MatrixXd d = atlas::testing::EuclideanDistances(
        atlas::testing::RandomPoints(rng, n, dim));
    const auto got = FinitePairs(RipsPersistenceH1(d));
    const auto want = oracle::NaiveRipsH1(d);
    total_pairs += want.size();
    o.Require(got == want, "random set " + std::to_string(t) + " (n=" +
                               std::to_string(n) + "): " +
                               std::to_string(got.size()) + " vs " +
                               std::to_string(want.size()) + " pairs");
  }

  Eigen::MatrixXd square(4, 2);
  square << 0, 0, 1, 0, 1, 1, 0, 1;
  const Eigen::MatrixXd sd = atlas::testing::EuclideanDistances(square);
  const auto sq = FinitePairs(RipsPersistenceH1(sd));
  o.Require(sq == oracle::NaiveRipsH1(sd), "square vs oracle");
  o.Require(sq.size() == 1 && std::abs(sq[0].birth - 1.0) <= 1e-9 &&
                std::abs(sq[0].death - std::sqrt(2.0)) <= 1e-9,
            "square pair (1, sqrt 2)");

  const LoadedCorpus circle =
      LoadCorpus(atlas::testing::FixtureDir("circle") / "embeddings.skmb",
                 atlas::testing::FixtureDir("circle") / "metadata.jsonl");
  const Eigen::MatrixXd cd = atlas::testing::EuclideanDistances(
      circle.corpus.embeddings().ToDouble());
  const auto cpairs = FinitePairs(RipsPersistenceH1(cd));
  o.Require(cpairs == oracle::NaiveRipsH1(cd), "circle vs oracle");
  std::vector<double> pers;
  for (const auto& p : cpairs) pers.push_back(p.death - p.birth);
  std::sort(pers.rbegin(), pers.rend());
  const double top = pers.empty() ? 0.0 : pers[0];
  const double runner = pers.size() > 1 ? pers[1] : 0.0;
  o.Require(circle.corpus.size() == 30, "circle fixture has 30 points");
  o.Require(!pers.empty() && top >= 5.0 * runner,
            "circle top " + Fmt(top) + " vs runner-up " + Fmt(runner));
  const double secs = Seconds(start);
  o.Require(secs < 60.0, "runtime " + Fmt(secs) + " s");
  o.Note("50 random sets (" + std::to_string(total_pairs) +
         " pairs) exact; square (1, 1.414); circle top " + Fmt(top) +
         " runner-up " + Fmt(runner) + "; " + Fmt(secs) + " s");
  return o;
}

Outcome Criterion4() {
  Outcome o;
  Rng rng(4004);
  std::size_t insertions = 0;
  double worst = -1.0;
  while (insertions < 1000) {
    const std::size_t n = 5 + rng.UniformIndex(16);
    Edges edges = atlas::testing::RandomConnectedGraph(rng, n, 0.1);
    Eigen::MatrixXd before =
        ComputeResistance(KnnGraph::FromEdges(n, edges)).naive;
    for (int step = 0; step < 20 && insertions < 1000; ++step) {
      std::set<std::pair<std::size_t, std::size_t>> present(edges.begin(),
                                                            edges.end());
      Edges missing;
      for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) {
          if (!present.count({u, v}) && !present.count({v, u})) {
            missing.emplace_back(u, v);
          }
        }
      }
      if (missing.empty()) break;
      edges.push_back(missing[rng.UniformIndex(missing.size())]);
      const Eigen::MatrixXd after =
          ComputeResistance(KnnGraph::FromEdges(n, edges)).naive;
      const double increase = (after - before).maxCoeff();
      worst = std::max(worst, increase);
      o.Require(increase <= 1e-10,
                "resistance rose by " + Fmt(increase) + " after insertion " +
                    std::to_string(insertions));
      before = after;
      ++insertions;
    }
  }
  o.Note(std::to_string(insertions) + " insertions, max change " + Fmt(worst));
  return o;
}

// Year 2020 pool and year 2021 release around a handful of cluster centers.
Corpus NoveltyFixture(std::uint64_t seed, std::size_t n_pool, std::size_t n_new,
                      bool far_cluster) {
  Rng rng(seed);
  constexpr std::size_t kDim = 16;
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < 4; ++c) centers.push_back(atlas::testing::UnitVector(rng, kDim));
  const auto far = atlas::testing::UnitVector(rng, kDim);
  const auto draw = [&](const std::vector<double>& center) {
    auto v = atlas::testing::Gaussian(rng, kDim, 0.35);
    for (std::size_t j = 0; j < kDim; ++j) v[j] += 2.0 * center[j];
    return v;
  };
  // Draw everything i.i.d., then deal rows into the two years at random.
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n_pool + n_new; ++i) {
    rows.push_back(draw(centers[rng.UniformIndex(centers.size())]));
  }
  std::vector<int> year(rows.size(), 2020);
  std::vector<std::size_t> order = AllRows(rows.size());
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.UniformIndex(i)]);
  }
  for (std::size_t i = 0; i < n_new; ++i) year[order[i]] = 2021;
  if (far_cluster) {
    std::size_t replaced = 0;
    for (std::size_t i = 0; i < rows.size() && replaced < n_new / 2; ++i) {
      if (year[i] == 2021) {
        rows[i] = draw(far);
        ++replaced;
      }
    }
  }
  CorpusBuilder b(kDim);
  for (std::size_t i = 0; i < rows.size(); ++i) b.Add(rows[i], "synthetic", year[i]);
  return b.Build();
}

double NoveltyOracleK1(const Corpus& c, int year) {
  const std::size_t d = c.dim();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.record(i).year != year) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (!(c.record(j).year && *c.record(j).year < year)) continue;
      best = std::min(best, oracle::Cosine(c.embeddings().row(i).data(),
                                           c.embeddings().row(j).data(), d));
    }
    sum += best;
    ++count;
  }
  return sum / static_cast<double>(count);
}

Outcome Criterion5() {
  Outcome o;
  const auto start = Clock::now();
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Corpus c = NoveltyFixture(500 + s, 400, 100, false);
    const double got = YearlyNovelty(c, 2021, 1);
    worst = std::max(worst, std::abs(got - NoveltyOracleK1(c, 2021)));
  }
  o.Require(worst <= 1e-9, "k=1 vs oracle " + Fmt(worst));

  int inside = 0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const Corpus c = NoveltyFixture(10000 + trial, 400, 100, false);
    NoveltyOptions opt;
    opt.seed = trial;
    const auto series = ComputeNoveltySeries(c, opt);
    const auto& y = series.years.at(0);
    if (y.nu_observed >= y.ci_low && y.nu_observed <= y.ci_high) ++inside;
  }
  o.Require(inside >= 45, "null coverage " + std::to_string(inside) + "/50");

  const Corpus planted = NoveltyFixture(777, 400, 100, true);
  const auto series = ComputeNoveltySeries(planted, NoveltyOptions{});
  const double ratio = series.years.at(0).ratio.value_or(0.0);
  o.Require(ratio > 1.5, "planted ratio " + Fmt(ratio));
  const double secs = Seconds(start);
  o.Require(secs < 120.0, "runtime " + Fmt(secs) + " s");
  o.Note("k=1 err " + Fmt(worst) + "; null inside CI " +
         std::to_string(inside) + "/50; planted ratio " + Fmt(ratio) + "; " +
         Fmt(secs) + " s");
  return o;
}

GaussianSummary Summary(std::string name, Eigen::VectorXd mu,
                        Eigen::MatrixXd sigma) {
  GaussianSummary s;
  s.dataset = std::move(name);
  s.n = 100;
  s.mu = std::move(mu);
  s.sigma = std::move(sigma);
  return s;
}

Outcome Criterion6() {
  Outcome o;
  const auto a = Summary("a", Eigen::VectorXd::Constant(1, 0.0),
                         Eigen::MatrixXd::Constant(1, 1, 1.0));
  const auto b = Summary("b", Eigen::VectorXd::Constant(1, 3.0),
                         Eigen::MatrixXd::Constant(1, 1, 4.0));
  const double fd1 = FrechetDistance(a, b).distance;
  o.Require(std::abs(fd1 - 10.0) <= 1e-8, "1-d closed form " + Fmt(fd1));

  Rng rng(6006);
  double asym = 0.0;
  bool diag_zero = true;
  for (int set = 0; set < 5; ++set) {
    const std::size_t d = 2 + rng.UniformIndex(7);
    std::vector<GaussianSummary> sums;
    for (int i = 0; i < 6; ++i) {
      Eigen::VectorXd mu(static_cast<Eigen::Index>(d));
      for (Eigen::Index j = 0; j < mu.size(); ++j) mu(j) = rng.Normal();
      sums.push_back(Summary("s" + std::to_string(i), mu,
                             atlas::testing::RandomSpd(rng, d)));
    }
    for (const auto& x : sums) {
      for (const auto& y : sums) {
        asym = std::max(asym, std::abs(FrechetDistance(x, y).distance -
                                       FrechetDistance(y, x).distance));
      }
    }
    const SimilarityMatrix sm = PairwiseFrechet(sums);
    for (Eigen::Index i = 0; i < sm.fd.rows(); ++i) {
      diag_zero = diag_zero && sm.fd(i, i) == 0.0;
      for (Eigen::Index j = 0; j < sm.fd.cols(); ++j) {
        asym = std::max(asym, std::abs(sm.fd(i, j) - sm.fd(j, i)));
      }
    }
  }
  o.Require(asym <= 1e-9, "asymmetry " + Fmt(asym));
  o.Require(diag_zero, "zero diagonal");

  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + rng.UniformIndex(16);
    const Eigen::MatrixXd x = atlas::testing::RandomSpd(rng, d);
    const Eigen::MatrixXd y = atlas::testing::RandomSpd(rng, d);
    worst = std::max(worst, std::abs(TraceSqrtProduct(x, y) -
                                     oracle::TraceSqrtByEigen(x, y)));
  }
  o.Require(worst <= 1e-6, "trace-sqrt err " + Fmt(worst));
  o.Note("1-d FD " + Fmt(fd1) + "; asymmetry " + Fmt(asym) +
         "; 100 SPD pairs max err " + Fmt(worst));
  return o;
}

Eigen::MatrixXd MixtureSample(Rng& rng, const std::vector<Eigen::VectorXd>& means,
                              std::size_t n, double sd) {
  const auto d = means[0].size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto& m = means[rng.UniformIndex(means.size())];
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = m(j) + sd * rng.Normal();
  }
  return x;
}

Outcome Criterion7() {
  Outcome o;
  Rng rng(7007);
  std::size_t fits = 0;
  double worst_drop = 0.0;
  double worst_ll_drop = 0.0;
  for (int t = 0; t < 12; ++t) {
    const std::size_t d = 2 + rng.UniformIndex(5);
    std::vector<Eigen::VectorXd> means;
    const std::size_t k_true = 1 + rng.UniformIndex(4);
    for (std::size_t k = 0; k < k_true; ++k) {
      Eigen::VectorXd m(static_cast<Eigen::Index>(d));
      for (Eigen::Index j = 0; j < m.size(); ++j) m(j) = 3.0 * rng.Normal();
      means.push_back(m);
    }
    const Eigen::MatrixXd x = MixtureSample(rng, means, 300, 0.7);
    for (std::size_t k : {1, 2, 3, 5, 8}) {
      GmmOptions opt;
      opt.components = k;
      opt.seed = static_cast<std::uint64_t>(t);
      const GmmModel m = FitGmm(x, opt);
      ++fits;
      for (std::size_t i = 1; i < m.objective_trace.size(); ++i) {
        worst_drop = std::max(worst_drop,
                              m.objective_trace[i - 1] - m.objective_trace[i]);
        worst_ll_drop =
            std::max(worst_ll_drop, m.log_likelihood_trace[i - 1] -
                                        m.log_likelihood_trace[i]);
      }
    }
  }
  o.Require(worst_drop <= 1e-8, "objective trace dropped by " + Fmt(worst_drop));

  std::vector<Eigen::VectorXd> truth = {Eigen::Vector2d(-3.0, -3.0),
                                        Eigen::Vector2d(3.0, 3.0)};
  const Eigen::MatrixXd x = MixtureSample(rng, truth, 400, 0.5);
  GmmOptions opt;
  opt.components = 2;
  const GmmModel m = FitGmm(x, opt);
  double mean_err = 0.0;
  for (const auto& t : truth) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m.means.rows(); ++k) {
      best = std::min(best, (m.means.row(k).transpose() - t).norm());
    }
    mean_err = std::max(mean_err, best);
  }
  o.Require(mean_err <= 0.1, "planted mean error " + Fmt(mean_err));

  bool exact = true;
  for (std::size_t n : {40, 100, 333, 1000, 1234}) {
    std::vector<double> scores(n);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.Normal();
      ids[i] = "s" + std::to_string(i);
    }
    const DensityReport rep = DensityExtremes(scores, ids);
    const std::size_t want = static_cast<std::size_t>(std::ceil(0.025 * n - 1e-9));
    exact = exact && rep.sparse_rows.size() == want && rep.dense_rows.size() == want;
  }
  o.Require(exact, "extremes flag ceil(0.025 n) per side");
  o.Note(std::to_string(fits) + " fits, max objective drop " + Fmt(worst_drop) +
         " (plain log-likelihood " + Fmt(worst_ll_drop) + "); planted error " +
         Fmt(mean_err));
  return o;
}

Outcome Criterion8() {
  Outcome o;
  Rng rng(8008);
  double worst = 0.0;
  for (double lambda : {0.01, 0.1, 1.0, 10.0}) {
    const std::size_t n = 60, d = 8;
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd beta(d);
    for (Eigen::Index j = 0; j < beta.size(); ++j) beta(j) = rng.Normal();
    std::vector<double> y(n);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.Normal() + 0.5;
      y[static_cast<std::size_t>(i)] = x.row(i).dot(beta) + 2.0 + 0.1 * rng.Normal();
    }
    const ProbeModel m = TrainRegressorProbe(x, y, lambda);
    const Eigen::VectorXd want = oracle::NormalEquationRidge(
        x, Eigen::Map<const Eigen::VectorXd>(y.data(), n), lambda);
    worst = std::max(worst, (m.weights.col(0) - want).cwiseAbs().maxCoeff());
  }
  o.Require(worst <= 1e-8, "ridge vs normal equations " + Fmt(worst));

  // Separable: three well-separated clusters, scored on fresh draws.
  const auto clusters = [&](std::size_t per, Eigen::MatrixXd& x,
                            std::vector<std::string>& y) {
    x.resize(static_cast<Eigen::Index>(3 * per), 5);
    y.clear();
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < per; ++i) {
        const auto r = static_cast<Eigen::Index>(c * per + i);
        for (Eigen::Index j = 0; j < 5; ++j) x(r, j) = 0.3 * rng.Normal();
        x(r, static_cast<Eigen::Index>(c)) += 4.0;
        y.push_back("class" + std::to_string(c));
      }
    }
  };
  Eigen::MatrixXd xtr, xte;
  std::vector<std::string> ytr, yte;
  clusters(50, xtr, ytr);
  clusters(50, xte, yte);
  const ProbeModel clf = TrainClassifierProbe(xtr, ytr);
  const double f1 = EvaluateClassifier(clf, xte, yte);
  o.Require(f1 == 1.0, "separable macro-F1 " + Fmt(f1));

  // Planted signal: gender is a strong direction; 40% of labels hidden.
  Rng prng(8118);
  constexpr std::size_t kDim = 16;
  const auto dir = atlas::testing::UnitVector(prng, kDim);
  CorpusBuilder b(kDim);
  std::vector<std::string> hidden_truth;
  std::vector<std::size_t> hidden_rows;
  for (std::size_t i = 0; i < 600; ++i) {
    const bool female = prng.Uniform() < 0.5;
    auto v = atlas::testing::Gaussian(prng, kDim, 0.3);
    for (std::size_t j = 0; j < kDim; ++j) v[j] += (female ? 1.0 : -1.0) * dir[j];
    const std::string dataset = i % 3 == 0 ? "held" : "main";
    MetadataRecord& r = b.Add(v, dataset, 2020);
    const std::string g = female ? "female" : "male";
    if (prng.Uniform() < 0.6) {
      r.gender = g;
    } else {
      hidden_truth.push_back(g);
      hidden_rows.push_back(b.size() - 1);
    }
  }
  const Corpus corpus = b.Build();
  const std::vector<ProbeFieldSpec> specs = {{"gender", ProbeKind::kClassifier, 1.0}};
  ProbeProtocolOptions po;
  po.draws = 200;
  po.held_out_datasets = {"held"};
  const ProbeSuite suite = RunProbeSuite(corpus, specs, po);
  const Imputation imp = ImputeMissing(corpus, suite.models);
  std::vector<std::string> imputed;
  for (std::size_t r : hidden_rows) imputed.push_back(imp.records[r].gender.value_or(""));
  const double imp_f1 = MacroF1(hidden_truth, imputed);
  o.Require(imp_f1 >= 0.95, "imputation macro-F1 " + Fmt(imp_f1));

  // Held-out protocol: recompute id intersections from the reported splits.
  const FieldProbeResult& res = suite.fields.at(0);
  std::set<std::string> train_ids;
  bool train_clean = true;
  for (std::size_t r : res.train_rows) {
    train_ids.insert(corpus.record(r).id);
    train_clean = train_clean && corpus.record(r).dataset != "held";
  }
  std::size_t shared = 0;
  bool saw_held = false;
  for (const auto& ev : res.evaluations) {
    saw_held = saw_held || ev.split == "held";
    o.Require(ev.train_overlap == 0, "reported overlap in " + ev.split);
    for (std::size_t r : ev.rows) shared += train_ids.count(corpus.record(r).id);
  }
  o.Require(shared == 0, std::to_string(shared) + " ids shared by train and eval");
  o.Require(train_clean && saw_held, "held-out dataset kept out of training");
  o.Note("ridge err " + Fmt(worst) + "; separable F1 " + Fmt(f1) +
         "; imputation F1 " + Fmt(imp_f1) + "; train/eval id overlap " +
         std::to_string(shared));
  return o;
}

std::vector<std::string> OracleSearch(const Corpus& c,
                                      const FieldResolver& fields,
                                      const RetrievalQuery& q,
                                      std::vector<double>* distances) {
  std::vector<double> qv;
  std::optional<std::size_t> self;
  if (q.sample_id) {
    self = c.IndexOf(*q.sample_id);
    for (float f : c.embeddings().row(*self)) qv.push_back(f);
  } else {
    qv = *q.vector;
    double norm = 0.0;
    for (double x : qv) norm += x * x;
    for (double& x : qv) x /= std::sqrt(norm);
  }
  std::vector<std::pair<double, std::string>> scored;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (self && i == *self) continue;
    const MetadataRecord& r = c.record(i);
    if (q.pool_dataset && r.dataset != *q.pool_dataset) continue;
    bool pass = true;
    for (const auto& [field, allowed] : q.filters) {
      const auto v = fields.Value(r, field);
      pass = pass && v && allowed.count(*v);
    }
    if (!pass) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < c.dim(); ++j) dot += qv[j] * c.embeddings().row(i)[j];
    scored.emplace_back(1.0 - dot, r.id);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < std::min(q.k, scored.size()); ++i) {
    ids.push_back(scored[i].second);
    distances->push_back(scored[i].first);
  }
  return ids;
}

Outcome Criterion9() {
  Outcome o;
  Rng rng(9009);
  constexpr std::size_t kDim = 8;
  CorpusBuilder b(kDim);
  const char* labels[] = {"a", "b", "c", "d"};
  for (std::size_t i = 0; i < 100; ++i) {
    MetadataRecord& r = b.Add(atlas::testing::Gaussian(rng, kDim),
                              i % 2 ? "left" : "right", 2020);
    if (i % 5 != 0) r.label = labels[rng.UniformIndex(4)];
  }
  const Corpus c = b.Build();
  const FieldResolver fields;
  std::size_t checked = 0;
  double worst = 0.0;
  bool ids_match = true;
  for (int t = 0; t < 100; ++t) {
    RetrievalQuery q;
    if (t % 2) {
      q.sample_id = c.record(rng.UniformIndex(c.size())).id;
    } else {
      q.vector = atlas::testing::Gaussian(rng, kDim);
    }
    q.k = 1 + rng.UniformIndex(15);
    if (t % 3 == 1) q.filters["label"] = {labels[rng.UniformIndex(4)], labels[rng.UniformIndex(4)]};
    if (t % 4 == 2) q.pool_dataset = t % 8 == 2 ? "left" : "right";
    std::vector<double> want_d;
    const auto want = OracleSearch(c, fields, q, &want_d);
    if (want.empty()) continue;
    const auto hits = Search(c, fields, q);
    ++checked;
    std::vector<std::string> got;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      got.push_back(hits[i].id);
      if (i < want_d.size()) worst = std::max(worst, std::abs(hits[i].distance - want_d[i]));
    }
    ids_match = ids_match && got == want;
  }
  o.Require(ids_match, "search ids differ from exhaustive sort");
  o.Require(worst <= 1e-12, "distance err " + Fmt(worst));

  const bool ranked[] = {true, false, true};
  const double ap = ComputeRetrievalMetrics(ranked, 2, 3).ap;
  o.Require(ap == 5.0 / 6.0, "AP hand case " + Fmt(ap));
  const double ap_oracle = oracle::AveragePrecision({true, false, true}, 2, 3);
  o.Require(std::abs(ap - ap_oracle) <= 1e-15, "AP vs brute force");

  // Planted duplicates: every "probe" sample has 12 near-copies with the
  // same label in "archive"; inside "probe" each label occurs twice.
  Rng drng(9119);
  CorpusBuilder db(kDim);
  for (std::size_t l = 0; l < 15; ++l) {
    for (int copy = 0; copy < 2; ++copy) {
      const auto base = atlas::testing::Gaussian(drng, kDim);
      db.Add(base, "probe", 2020).label = "dx" + std::to_string(l);
      for (int dup = 0; dup < 12; ++dup) {
        auto v = base;
        for (double& x : v) x += 0.01 * drng.Normal();
        db.Add(v, "archive", 2020).label = "dx" + std::to_string(l);
      }
    }
  }
  const Corpus dc = db.Build();
  RetrievalEvalOptions ro;
  ro.ks = {1, 5, 10};
  double atlas_p = 1.0, same_p = 0.0;
  for (RetrievalMode mode : {RetrievalMode::kAtlas, RetrievalMode::kSameDataset}) {
    for (const auto& row : EvalRetrieval(dc, fields, "probe", mode, ro)) {
      if (row.k != 10) continue;
      (mode == RetrievalMode::kAtlas ? atlas_p : same_p) = row.precision;
    }
  }
  o.Require(atlas_p == 1.0, "atlas precision@10 " + Fmt(atlas_p));
  o.Require(same_p < atlas_p, "same-dataset " + Fmt(same_p) + " < atlas");
  o.Note(std::to_string(checked) + " queries match the oracle (max err " +
         Fmt(worst) + "); AP " + Fmt(ap) + "; precision@10 same " +
         Fmt(same_p) + " vs atlas " + Fmt(atlas_p));
  return o;
}

int Cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"atlas"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = atlas::cli::RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (rc != 0) std::fprintf(stderr, "%s\n", err.str().c_str());
  return rc;
}

std::vector<std::string> AuditArgs(const std::filesystem::path& out,
                                   std::uint64_t seed) {
  const auto fx = atlas::testing::FixtureDir("atlas");
  const auto cfg = atlas::testing::SourceDir() / "config";
  return {"audit-all",
          "--embeddings_path", (fx / "embeddings.skmb").string(),
          "--metadata_path", (fx / "metadata.jsonl").string(),
          "--icd_blocks", (cfg / "icd_blocks.json").string(),
          "--baseline_config", (cfg / "baselines.json").string(),
          "--seed", std::to_string(seed),
          "--out_dir", out.string()};
}

std::map<std::string, std::vector<std::uint8_t>> DirBytes(
    const std::filesystem::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    out[e.path().filename().string()] = atlas::testing::ReadBytes(e.path());
  }
  return out;
}

json ReadJson(const std::filesystem::path& p) { return json::parse(ReadTextFile(p)); }

Outcome Criterion10() {
  Outcome o;
  const auto a = atlas::testing::ScratchDir("accept_run_a");
  const auto b = atlas::testing::ScratchDir("accept_run_b");
  const auto c = atlas::testing::ScratchDir("accept_run_c");
  o.Require(Cli(AuditArgs(a, 42)) == 0, "first audit-all");
  o.Require(Cli(AuditArgs(b, 42)) == 0, "second audit-all");
  o.Require(Cli(AuditArgs(c, 43)) == 0, "audit-all with seed 43");
  if (!o.pass) return o;
  const auto da = DirBytes(a), db = DirBytes(b);
  o.Require(da.size() >= 9, "expected every section file");
  o.Require(da == db, "seed 42 runs differ");

  const json na = ReadJson(a / "novelty.json"), nc = ReadJson(c / "novelty.json");
  o.Require(na["years"] != nc["years"], "seed change left bootstrap draws unchanged");
  o.Require(ReadJson(a / "similarity.json")["fd"] == ReadJson(c / "similarity.json")["fd"],
            "FD changed with the seed");
  const json ha = ReadJson(a / "holes.json"), hc = ReadJson(c / "holes.json");
  o.Require(ha["pairs"] == hc["pairs"], "persistence changed with the seed");
  o.Require(ha["clamped_negative"] == hc["clamped_negative"],
            "resistance changed with the seed");
  o.Note(std::to_string(da.size()) + " files byte-identical; seed 43 moves the "
         "novelty CI but not FD or persistence");
  return o;
}

Outcome Criterion11() {
  Outcome o;
  Rng rng(1111);
  bool round_trip = true;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.UniformIndex(40), d = 1 + rng.UniformIndex(40);
    std::vector<float> v(n * d);
    for (float& x : v) x = static_cast<float>(rng.Normal() * 1e3);
    v[0] = -0.0f;
    if (v.size() > 1) v[1] = std::numeric_limits<float>::denorm_min();
    const EmbeddingMatrix m(n, d, v);
    const auto bytes = EncodeEmbeddings(m);
    const EmbeddingMatrix back = DecodeEmbeddings(bytes);
    round_trip = round_trip && back.rows() == n && back.cols() == d &&
                 std::memcmp(back.values().data(), v.data(), v.size() * 4) == 0 &&
                 EncodeEmbeddings(back) == bytes;
  }
  const auto dir = atlas::testing::ScratchDir("accept_formats");
  const auto fixture = atlas::testing::FixtureDir("atlas") / "embeddings.skmb";
  const auto original = atlas::testing::ReadBytes(fixture);
  SaveEmbeddings(dir / "copy.skmb", LoadEmbeddings(fixture));
  round_trip = round_trip && atlas::testing::ReadBytes(dir / "copy.skmb") == original;
  o.Require(round_trip, "byte-exact round trip");

  const auto good = EncodeEmbeddings(EmbeddingMatrix(2, 3, {1, 2, 3, 4, 5, 6}));
  const auto kind_of = [](std::vector<std::uint8_t> bytes) -> std::string {
    try {
      DecodeEmbeddings(bytes);
    } catch (const LoadError& e) {
      return std::string(LoadErrorKindName(e.kind()));
    }
    return "accepted";
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  auto bad_version = good;
  bad_version[4] = 9;
  const std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 12);
  const std::vector<std::uint8_t> short_payload(good.begin(), good.end() - 4);
  auto trailing = good;
  trailing.push_back(0);
  auto zero_dim = good;
  std::fill(zero_dim.begin() + 16, zero_dim.begin() + 20, 0);
  auto nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 20, &q, 4);
  const std::vector<std::pair<std::string, std::vector<std::uint8_t>>> cases = {
      {"bad_magic", bad_magic},         {"version_mismatch", bad_version},
      {"truncated_header", short_header}, {"truncated_payload", short_payload},
      {"trailing_bytes", trailing},     {"invalid_dimensions", zero_dim},
      {"non_finite", nan}};
  std::set<std::string> kinds;
  for (const auto& [want, bytes] : cases) {
    const std::string got = kind_of(bytes);
    kinds.insert(got);
    o.Require(got == want, want + " reported as " + got);
  }
  std::string io_kind;
  try {
    LoadEmbeddings(dir / "missing.skmb");
  } catch (const LoadError& e) {
    io_kind = LoadErrorKindName(e.kind());
  }
  o.Require(io_kind == "io", "missing file reported as " + io_kind);
  o.Require(kinds.size() == cases.size(), "error kinds are not distinct");
  o.Note("21 round trips byte-exact; " + std::to_string(kinds.size()) +
         " distinct header/payload errors");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"effective-resistance oracle", Criterion1},
      {"degree-corrected resistance", Criterion2},
      {"H1 persistence oracle", Criterion3},
      {"Rayleigh monotonicity", Criterion4},
      {"yearly novelty", Criterion5},
      {"Frechet distance", Criterion6},
      {"GMM", Criterion7},
      {"linear probes", Criterion8},
      {"retrieval", Criterion9},
      {"determinism", Criterion10},
      {"embedding formats", Criterion11},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
