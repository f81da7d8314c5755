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

#ifndef ATLAS_RETRIEVAL_H_
#define ATLAS_RETRIEVAL_H_

#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/fields.h"

namespace atlas {

struct RetrievalQuery {
  // Exactly one of these is set. Vectors are unit-normalized on entry.
  std::optional<std::vector<double>> vector;
  std::optional<std::string> sample_id;
  std::size_t k = 10;
  // field -> allowed values; a sample passes when its value is in the set.
  std::map<std::string, std::set<std::string>> filters;
  // Pool restriction; both unset means the whole corpus.
  std::optional<std::string> pool_dataset;
  std::optional<std::vector<std::string>> pool_ids;
};

// Parses {vector? | sample_id?, k?, filters?, pool?}. `pool` is "all", a
// dataset name, an array of ids, or {"dataset": ...} / {"ids": [...]}.
// Filter values may be scalars or arrays. Throws Error(kInvalidArgument).
RetrievalQuery QueryFromJson(const nlohmann::json& body);

struct SearchHit {
  std::string id;
  std::size_t row = 0;
  double distance = 0.0;
};

// Top-k by cosine distance over the filtered pool, ties by id. A query
// sample never retrieves itself. Fewer than k hits come back when the pool
// is smaller. Errors: kNotFound for an unknown sample, dataset, pool id, or
// filter field; kEmptyPool naming the filter that emptied the pool;
// kInvalidArgument for a bad vector or k.
std::vector<SearchHit> Search(const Corpus& corpus,
                              const FieldResolver& resolver,
                              const RetrievalQuery& query);

// Hits with their metadata records.
nlohmann::json SearchResultJson(const Corpus& corpus,
                                std::span<const SearchHit> hits);

struct RetrievalMetrics {
  std::size_t hits = 0;
  double precision = 0.0;              // hits / k
  std::optional<double> recall;        // hits / R, absent when R = 0
  std::optional<double> recall_capped;  // hits / min(R, k)
  double ap = 0.0;  // sum of precision@r at relevant r <= k, / min(R, k)
};

// `ranked` lists relevance by rank; only the first k entries count.
RetrievalMetrics ComputeRetrievalMetrics(std::span<const bool> ranked,
                                         std::size_t relevant_total,
                                         std::size_t k);

enum class RetrievalMode { kSameDataset, kAtlas };

std::string_view RetrievalModeName(RetrievalMode mode);

struct RetrievalEvalRow {
  std::string dataset;
  RetrievalMode mode = RetrievalMode::kAtlas;
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double recall_capped = 0.0;
  double ap = 0.0;
  std::size_t n_queries = 0;      // queries with at least one relevant item
  std::size_t n_no_relevant = 0;  // excluded from the means
};

struct RetrievalEvalOptions {
  std::string label_field = "label";
  std::vector<std::size_t> ks = {1, 5, 10};
  int workers = 1;
};

// Every labeled sample of `dataset` queries its own dataset (same-dataset)
// or the whole corpus (atlas), self excluded; relevance is equality of the
// label field. One row per k.
std::vector<RetrievalEvalRow> EvalRetrieval(const Corpus& corpus,
                                            const FieldResolver& resolver,
                                            std::string_view dataset,
                                            RetrievalMode mode,
                                            const RetrievalEvalOptions& options);

struct RetrievalAudit {
  std::vector<RetrievalEvalRow> rows;
  std::vector<std::string> skipped_datasets;  // no labeled samples
};

// Both modes for every dataset with labeled samples.
RetrievalAudit AuditRetrieval(const Corpus& corpus,
                              const FieldResolver& resolver,
                              const RetrievalEvalOptions& options);

}  // namespace atlas

#endif  // ATLAS_RETRIEVAL_H_
