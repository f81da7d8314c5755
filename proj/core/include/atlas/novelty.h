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

#ifndef ATLAS_NOVELTY_H_
#define ATLAS_NOVELTY_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/fields.h"

namespace atlas {

// Current-year rows I_t (year == t) and historical pool P_t (year < t).
// Rows without a year belong to neither.
struct YearSplit {
  std::vector<std::size_t> current;
  std::vector<std::size_t> pool;
};
YearSplit SplitByYear(const Corpus& corpus, int year);

// Mean of the k smallest cosine distances from each query row to the pool.
std::vector<double> KnnMeanDistances(const Corpus& corpus,
                                     std::span<const std::size_t> queries,
                                     std::span<const std::size_t> pool,
                                     std::size_t k, bool exclude_self,
                                     int workers = 1);

// Observed novelty: mean over I_t of the per-sample k-NN mean distance to
// P_t. Throws Error(kInvalidInput) naming the empty set when I_t or P_t is
// empty.
double YearlyNovelty(const Corpus& corpus, int year, std::size_t k,
                     int workers = 1);

struct BootstrapBaseline {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> draws;
};

// Null novelty for `year`: each draw resamples |I_t| pool positions with
// replacement and scores them against P_t with the self-match excluded.
// Draw b uses the substream (seed, year, b), so the result does not depend
// on which other years are computed. CI bounds are the alpha/2 and
// 1 - alpha/2 empirical quantiles of the draws.
BootstrapBaseline BootstrapNoveltyBaseline(const Corpus& corpus, int year,
                                           std::size_t k, std::size_t draws,
                                           double alpha, std::uint64_t seed,
                                           int workers = 1);

struct NoveltyOptions {
  std::size_t k = 10;
  std::size_t draws = 200;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  int workers = 1;
};

struct YearlyNoveltyRow {
  int year = 0;
  std::size_t n_new = 0;
  std::size_t n_pool = 0;
  double nu_observed = 0.0;
  double nu_baseline_mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> ratio;  // absent when the baseline is 0
  std::vector<double> draws;
};

struct NoveltySeries {
  std::vector<YearlyNoveltyRow> years;  // ascending
  std::vector<std::string> warnings;
  std::size_t samples_without_year = 0;
};

// One row per year that has a non-empty history; the first year is skipped.
NoveltySeries ComputeNoveltySeries(const Corpus& corpus,
                                   const NoveltyOptions& options);

struct GroupNovelty {
  std::string group;
  std::size_t n_samples = 0;   // all members, scoreable or not
  std::size_t n_datasets = 0;
  std::size_t n_scored = 0;
  double mean_novelty = 0.0;
};

// Per-group mean of per-sample novelty, each sample scored against every
// sample from earlier years. Groups with no scoreable member are omitted.
// Sorted by n_samples descending, then group name.
std::vector<GroupNovelty> GroupedNovelty(const Corpus& corpus,
                                         const FieldResolver& fields,
                                         std::string_view group_field,
                                         std::size_t k, int workers = 1);

struct CoveragePoint {
  int year = 0;
  std::string stratum;
  double cumulative_fraction = 0.0;
  std::size_t codes_seen = 0;
};

// Fraction of the global code universe (all codes on dated records) seen in
// each stratum up to and including each year. An empty stratify_field puts
// everything in one "all" stratum.
std::vector<CoveragePoint> CumulativeCoverage(const Corpus& corpus,
                                              const FieldResolver& fields,
                                              std::string_view code_field,
                                              std::string_view stratify_field);

struct OrphanLabel {
  std::string code;
  std::optional<std::string> description;
  std::size_t n_samples = 0;
  int first_year = 0;
  int last_year = 0;
};

// Codes whose last dated sample precedes `last_seen_before`, sorted by
// sample count descending, then code.
std::vector<OrphanLabel> OrphanLabels(
    const Corpus& corpus, const FieldResolver& fields,
    std::string_view code_field, int last_seen_before,
    const std::map<std::string, std::string>& descriptions = {});

}  // namespace atlas

#endif  // ATLAS_NOVELTY_H_
