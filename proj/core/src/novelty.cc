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

#include "atlas/novelty.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "atlas/errors.h"
#include "atlas/geometry.h"
#include "atlas/parallel.h"
#include "atlas/rng.h"
#include "atlas/stats.h"

namespace atlas {
namespace {

std::vector<int> DistinctYears(const Corpus& corpus) {
  std::set<int> years;
  for (const auto& r : corpus.records()) {
    if (r.year) years.insert(*r.year);
  }
  return {years.begin(), years.end()};
}

}  // namespace

YearSplit SplitByYear(const Corpus& corpus, int year) {
  YearSplit split;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& y = corpus.record(i).year;
    if (!y) continue;
    if (*y == year) split.current.push_back(i);
    if (*y < year) split.pool.push_back(i);
  }
  return split;
}

std::vector<double> KnnMeanDistances(const Corpus& corpus,
                                     std::span<const std::size_t> queries,
                                     std::span<const std::size_t> pool,
                                     std::size_t k, bool exclude_self,
                                     int workers) {
  KnnOptions opt;
  opt.k = k;
  opt.exclude_self = exclude_self;
  opt.metric = Metric::kCosine;
  opt.workers = workers;
  const auto lists = Knn(corpus.embeddings(), queries, pool, opt);
  std::vector<double> scores(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    double sum = 0.0;
    for (const auto& nb : lists[i].neighbors) sum += nb.distance;
    scores[i] = sum / static_cast<double>(k);
  }
  return scores;
}

double YearlyNovelty(const Corpus& corpus, int year, std::size_t k,
                     int workers) {
  const auto split = SplitByYear(corpus, year);
  if (split.current.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "no current-year samples for " + std::to_string(year));
  }
  if (split.pool.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "historical pool before " + std::to_string(year) + " is empty");
  }
  const auto scores =
      KnnMeanDistances(corpus, split.current, split.pool, k, false, workers);
  return Mean(scores);
}

BootstrapBaseline BootstrapNoveltyBaseline(const Corpus& corpus, int year,
                                           std::size_t k, std::size_t draws,
                                           double alpha, std::uint64_t seed,
                                           int workers) {
  if (draws == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "bootstrap needs at least one draw");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
  const auto split = SplitByYear(corpus, year);
  if (split.current.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "no current-year samples for " + std::to_string(year));
  }
  const std::size_t pool_size = split.pool.size();
  if (pool_size < 2 || k + 1 > pool_size) {
    throw Error(ErrorCode::kInvalidInput,
                "historical pool before " + std::to_string(year) + " has " +
                    std::to_string(pool_size) +
                    " samples; the baseline needs at least k + 1 = " +
                    std::to_string(k + 1));
  }
  const std::size_t cohort = split.current.size();

  // Draw positions first, then score only the pool members that were hit.
  std::vector<std::vector<std::uint32_t>> picks(draws);
  std::vector<char> needed(pool_size, 0);
  for (std::size_t b = 0; b < draws; ++b) {
    Rng rng = Rng::Substream(seed, {static_cast<std::uint64_t>(
                                        static_cast<std::int64_t>(year)),
                                    b});
    picks[b].resize(cohort);
    for (auto& p : picks[b]) {
      p = static_cast<std::uint32_t>(rng.UniformIndex(pool_size));
      needed[p] = 1;
    }
  }
  std::vector<std::size_t> score_positions;
  for (std::size_t p = 0; p < pool_size; ++p) {
    if (needed[p]) score_positions.push_back(p);
  }
  std::vector<std::size_t> score_rows(score_positions.size());
  for (std::size_t i = 0; i < score_positions.size(); ++i) {
    score_rows[i] = split.pool[score_positions[i]];
  }
  const auto scored =
      KnnMeanDistances(corpus, score_rows, split.pool, k, true, workers);
  std::vector<double> score_at(pool_size, 0.0);
  for (std::size_t i = 0; i < score_positions.size(); ++i) {
    score_at[score_positions[i]] = scored[i];
  }

  BootstrapBaseline out;
  out.draws.resize(draws);
  for (std::size_t b = 0; b < draws; ++b) {
    double sum = 0.0;
    for (auto p : picks[b]) sum += score_at[p];
    out.draws[b] = sum / static_cast<double>(cohort);
  }
  out.mean = Mean(out.draws);
  std::vector<double> sorted = out.draws;
  std::sort(sorted.begin(), sorted.end());
  out.ci_low = QuantileSorted(sorted, alpha / 2.0);
  out.ci_high = QuantileSorted(sorted, 1.0 - alpha / 2.0);
  return out;
}

NoveltySeries ComputeNoveltySeries(const Corpus& corpus,
                                   const NoveltyOptions& options) {
  NoveltySeries series;
  for (const auto& r : corpus.records()) {
    if (!r.year) ++series.samples_without_year;
  }
  const auto years = DistinctYears(corpus);
  if (years.size() < 2) {
    series.warnings.push_back(
        "novelty needs at least two distinct release years; found " +
        std::to_string(years.size()));
    return series;
  }
  for (std::size_t yi = 1; yi < years.size(); ++yi) {
    const int year = years[yi];
    const auto split = SplitByYear(corpus, year);
    if (split.pool.size() < options.k + 1) {
      series.warnings.push_back(
          "year " + std::to_string(year) + " skipped: pool of " +
          std::to_string(split.pool.size()) + " is smaller than k + 1");
      continue;
    }
    YearlyNoveltyRow row;
    row.year = year;
    row.n_new = split.current.size();
    row.n_pool = split.pool.size();
    row.nu_observed =
        Mean(KnnMeanDistances(corpus, split.current, split.pool, options.k,
                              false, options.workers));
    auto baseline =
        BootstrapNoveltyBaseline(corpus, year, options.k, options.draws,
                                 options.alpha, options.seed, options.workers);
    row.nu_baseline_mean = baseline.mean;
    row.ci_low = baseline.ci_low;
    row.ci_high = baseline.ci_high;
    if (baseline.mean > 0.0) row.ratio = row.nu_observed / baseline.mean;
    row.draws = std::move(baseline.draws);
    series.years.push_back(std::move(row));
  }
  return series;
}

std::vector<GroupNovelty> GroupedNovelty(const Corpus& corpus,
                                         const FieldResolver& fields,
                                         std::string_view group_field,
                                         std::size_t k, int workers) {
  fields.Validate(group_field);
  std::vector<std::optional<double>> novelty(corpus.size());
  const auto years = DistinctYears(corpus);
  for (std::size_t yi = 1; yi < years.size(); ++yi) {
    const auto split = SplitByYear(corpus, years[yi]);
    if (split.pool.size() < k) continue;
    const auto scores =
        KnnMeanDistances(corpus, split.current, split.pool, k, false, workers);
    for (std::size_t i = 0; i < split.current.size(); ++i) {
      novelty[split.current[i]] = scores[i];
    }
  }

  struct Acc {
    std::size_t n = 0;
    std::set<std::string> datasets;
    std::size_t scored = 0;
    double sum = 0.0;
  };
  std::map<std::string, Acc> groups;
  bool any = false;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto value = fields.Value(corpus.record(i), group_field);
    if (!value) continue;
    any = true;
    auto& acc = groups[*value];
    ++acc.n;
    acc.datasets.insert(corpus.record(i).dataset);
    if (novelty[i]) {
      ++acc.scored;
      acc.sum += *novelty[i];
    }
  }
  if (!any) {
    throw Error(ErrorCode::kInvalidInput,
                "field '" + std::string(group_field) + "' is never populated");
  }
  std::vector<GroupNovelty> out;
  for (auto& [name, acc] : groups) {
    if (acc.scored == 0) continue;
    out.push_back({name, acc.n, acc.datasets.size(), acc.scored,
                   acc.sum / static_cast<double>(acc.scored)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.n_samples != b.n_samples) return a.n_samples > b.n_samples;
    return a.group < b.group;
  });
  return out;
}

std::vector<CoveragePoint> CumulativeCoverage(const Corpus& corpus,
                                              const FieldResolver& fields,
                                              std::string_view code_field,
                                              std::string_view stratify_field) {
  fields.Validate(code_field);
  if (!stratify_field.empty()) fields.Validate(stratify_field);

  std::set<std::string> universe;
  std::set<int> years;
  // stratum -> year -> codes first appearing there
  std::map<std::string, std::map<int, std::set<std::string>>> by_stratum;
  for (const auto& r : corpus.records()) {
    if (!r.year) continue;
    const auto code = fields.Value(r, code_field);
    if (!code) continue;
    universe.insert(*code);
    years.insert(*r.year);
    std::string stratum = "all";
    if (!stratify_field.empty()) {
      auto s = fields.Value(r, stratify_field);
      if (!s) continue;
      stratum = *s;
    }
    by_stratum[stratum][*r.year].insert(*code);
  }
  std::vector<CoveragePoint> out;
  if (universe.empty()) return out;
  const double total = static_cast<double>(universe.size());
  for (const auto& [stratum, per_year] : by_stratum) {
    std::set<std::string> seen;
    for (int year : years) {
      auto it = per_year.find(year);
      if (it != per_year.end()) seen.insert(it->second.begin(), it->second.end());
      out.push_back({year, stratum, static_cast<double>(seen.size()) / total,
                     seen.size()});
    }
  }
  return out;
}

std::vector<OrphanLabel> OrphanLabels(
    const Corpus& corpus, const FieldResolver& fields,
    std::string_view code_field, int last_seen_before,
    const std::map<std::string, std::string>& descriptions) {
  fields.Validate(code_field);
  std::map<std::string, OrphanLabel> stats;
  for (const auto& r : corpus.records()) {
    if (!r.year) continue;
    const auto code = fields.Value(r, code_field);
    if (!code) continue;
    auto [it, inserted] = stats.try_emplace(*code);
    auto& s = it->second;
    if (inserted) {
      s.code = *code;
      s.first_year = s.last_year = *r.year;
    }
    ++s.n_samples;
    s.first_year = std::min(s.first_year, *r.year);
    s.last_year = std::max(s.last_year, *r.year);
  }
  std::vector<OrphanLabel> out;
  for (auto& [code, s] : stats) {
    if (s.last_year >= last_seen_before) continue;
    if (auto d = descriptions.find(code); d != descriptions.end()) {
      s.description = d->second;
    }
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.n_samples != b.n_samples) return a.n_samples > b.n_samples;
    return a.code < b.code;
  });
  return out;
}

}  // namespace atlas
