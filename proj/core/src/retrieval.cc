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

#include "atlas/retrieval.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <unordered_set>

#include "atlas/errors.h"
#include "atlas/parallel.h"

namespace atlas {
namespace {

struct Ranked {
  double distance;
  std::size_t row;
};

double Cosine(std::span<const double> q, std::span<const float> v) {
  double dot = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) dot += q[j] * v[j];
  return 1.0 - dot;
}

// Top-k of `pool` by (distance, id).
std::vector<Ranked> TopK(const Corpus& corpus, std::span<const double> q,
                         std::span<const std::size_t> pool, std::size_t k) {
  std::vector<Ranked> cand;
  cand.reserve(pool.size());
  for (std::size_t r : pool) {
    cand.push_back({Cosine(q, corpus.embeddings().row(r)), r});
  }
  const auto less = [&](const Ranked& a, const Ranked& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return corpus.record(a.row).id < corpus.record(b.row).id;
  };
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(take),
                    cand.end(), less);
  cand.resize(take);
  return cand;
}

std::vector<double> RowVector(const Corpus& corpus, std::size_t row) {
  const auto v = corpus.embeddings().row(row);
  return {v.begin(), v.end()};
}

std::string DescribeFilter(const std::string& field,
                           const std::set<std::string>& values) {
  std::string s = field + " in {";
  bool first = true;
  for (const auto& v : values) {
    if (!first) s += ", ";
    s += v;
    first = false;
  }
  return s + "}";
}

std::set<std::string> FilterValues(const nlohmann::json& v,
                                   const std::string& field) {
  std::set<std::string> out;
  const auto add = [&](const nlohmann::json& x) {
    if (x.is_string()) {
      out.insert(x.get<std::string>());
    } else if (x.is_number_integer()) {
      out.insert(std::to_string(x.get<long long>()));
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "filter '" + field + "' values must be strings or integers");
    }
  };
  if (v.is_array()) {
    for (const auto& x : v) add(x);
  } else {
    add(v);
  }
  return out;
}

}  // namespace

RetrievalQuery QueryFromJson(const nlohmann::json& body) {
  if (!body.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "query body must be an object");
  }
  for (const auto& [key, value] : body.items()) {
    if (key != "vector" && key != "sample_id" && key != "k" &&
        key != "filters" && key != "pool") {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown query key '" + key + "'");
    }
  }
  RetrievalQuery q;
  const bool has_vector = body.contains("vector") && !body["vector"].is_null();
  const bool has_id =
      body.contains("sample_id") && !body["sample_id"].is_null();
  if (has_vector == has_id) {
    throw Error(ErrorCode::kInvalidArgument,
                "exactly one of 'vector' and 'sample_id' is required");
  }
  if (has_vector) {
    const auto& v = body["vector"];
    if (!v.is_array()) {
      throw Error(ErrorCode::kInvalidArgument, "'vector' must be an array");
    }
    std::vector<double> values;
    values.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "'vector' entries must be numbers");
      }
      values.push_back(x.get<double>());
    }
    q.vector = std::move(values);
  } else {
    if (!body["sample_id"].is_string()) {
      throw Error(ErrorCode::kInvalidArgument, "'sample_id' must be a string");
    }
    q.sample_id = body["sample_id"].get<std::string>();
  }
  if (body.contains("k")) {
    const auto& k = body["k"];
    if (!k.is_number_integer() || k.get<long long>() < 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "'k' must be a positive integer");
    }
    q.k = k.get<std::size_t>();
  }
  if (body.contains("filters") && !body["filters"].is_null()) {
    const auto& f = body["filters"];
    if (!f.is_object()) {
      throw Error(ErrorCode::kInvalidArgument, "'filters' must be an object");
    }
    for (const auto& [field, values] : f.items()) {
      q.filters[field] = FilterValues(values, field);
    }
  }
  if (body.contains("pool") && !body["pool"].is_null()) {
    const auto& p = body["pool"];
    const auto ids = [&](const nlohmann::json& a) {
      std::vector<std::string> out;
      for (const auto& x : a) {
        if (!x.is_string()) {
          throw Error(ErrorCode::kInvalidArgument, "pool ids must be strings");
        }
        out.push_back(x.get<std::string>());
      }
      return out;
    };
    if (p.is_string()) {
      if (p.get<std::string>() != "all") q.pool_dataset = p.get<std::string>();
    } else if (p.is_array()) {
      q.pool_ids = ids(p);
    } else if (p.is_object() && p.contains("dataset") &&
               p["dataset"].is_string()) {
      q.pool_dataset = p["dataset"].get<std::string>();
    } else if (p.is_object() && p.contains("ids") && p["ids"].is_array()) {
      q.pool_ids = ids(p["ids"]);
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "'pool' must be \"all\", a dataset name, or an id list");
    }
  }
  return q;
}

std::vector<SearchHit> Search(const Corpus& corpus,
                              const FieldResolver& resolver,
                              const RetrievalQuery& query) {
  if (query.vector.has_value() == query.sample_id.has_value()) {
    throw Error(ErrorCode::kInvalidArgument,
                "exactly one of vector and sample_id is required");
  }
  if (query.k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  }
  std::vector<double> q;
  std::optional<std::size_t> self;
  if (query.sample_id) {
    self = corpus.IndexOf(*query.sample_id);
    if (!self) {
      throw Error(ErrorCode::kNotFound,
                  "unknown sample_id '" + *query.sample_id + "'");
    }
    q = RowVector(corpus, *self);
  } else {
    q = *query.vector;
    if (q.size() != corpus.dim()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "query vector has dimension " + std::to_string(q.size()) +
                      ", expected " + std::to_string(corpus.dim()));
    }
    double norm = 0.0;
    for (double x : q) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "query vector entries must be finite");
      }
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "query vector has zero norm");
    }
    for (double& x : q) x /= norm;
  }
  for (const auto& [field, values] : query.filters) resolver.Validate(field);

  std::vector<std::size_t> pool;
  std::string pool_desc = "all samples";
  if (query.pool_dataset) {
    pool = corpus.RowsOfDataset(*query.pool_dataset);
    if (pool.empty()) {
      throw Error(ErrorCode::kNotFound,
                  "unknown dataset '" + *query.pool_dataset + "'");
    }
    pool_desc = "dataset " + *query.pool_dataset;
  } else if (query.pool_ids) {
    for (const auto& id : *query.pool_ids) {
      const auto row = corpus.IndexOf(id);
      if (!row) {
        throw Error(ErrorCode::kNotFound, "unknown pool id '" + id + "'");
      }
      pool.push_back(*row);
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    pool_desc = "id list";
  } else {
    pool.resize(corpus.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  if (self) std::erase(pool, *self);
  if (pool.empty()) {
    throw Error(ErrorCode::kEmptyPool,
                "pool (" + pool_desc + ") is empty after excluding the query");
  }
  // Filters apply in field order so the error names the first one to empty
  // the pool.
  for (const auto& [field, values] : query.filters) {
    std::erase_if(pool, [&](std::size_t r) {
      const auto v = resolver.Value(corpus.record(r), field);
      return !v || !values.count(*v);
    });
    if (pool.empty()) {
      throw Error(ErrorCode::kEmptyPool,
                  "filter " + DescribeFilter(field, values) +
                      " leaves no candidates in " + pool_desc);
    }
  }
  std::vector<SearchHit> out;
  for (const auto& r : TopK(corpus, q, pool, query.k)) {
    out.push_back({corpus.record(r.row).id, r.row, r.distance});
  }
  return out;
}

nlohmann::json SearchResultJson(const Corpus& corpus,
                                std::span<const SearchHit> hits) {
  nlohmann::json out = nlohmann::json::array();
  std::size_t rank = 1;
  for (const auto& h : hits) {
    out.push_back({{"rank", rank++},
                   {"id", h.id},
                   {"distance", h.distance},
                   {"metadata", RecordToJson(corpus.record(h.row))}});
  }
  return out;
}

RetrievalMetrics ComputeRetrievalMetrics(std::span<const bool> ranked,
                                         std::size_t relevant_total,
                                         std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  RetrievalMetrics m;
  // Extended precision so short hand cases such as (1 + 2/3) / 2 round to
  // the nearest double.
  long double precision_sum = 0.0L;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (!ranked[r]) continue;
    ++m.hits;
    precision_sum += static_cast<long double>(m.hits) /
                     static_cast<long double>(r + 1);
  }
  m.precision = static_cast<double>(m.hits) / static_cast<double>(k);
  if (relevant_total > 0) {
    const double cap = static_cast<double>(std::min(relevant_total, k));
    m.recall = static_cast<double>(m.hits) / static_cast<double>(relevant_total);
    m.recall_capped = static_cast<double>(m.hits) / cap;
    m.ap = static_cast<double>(precision_sum / static_cast<long double>(cap));
  }
  return m;
}

std::string_view RetrievalModeName(RetrievalMode mode) {
  return mode == RetrievalMode::kSameDataset ? "same-dataset" : "atlas";
}

std::vector<RetrievalEvalRow> EvalRetrieval(
    const Corpus& corpus, const FieldResolver& resolver,
    std::string_view dataset, RetrievalMode mode,
    const RetrievalEvalOptions& options) {
  resolver.Validate(options.label_field);
  if (options.ks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "retrieval_k list is empty");
  }
  for (std::size_t k : options.ks) {
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  }
  const auto own = corpus.RowsOfDataset(dataset);
  if (own.empty()) {
    throw Error(ErrorCode::kNotFound,
                "unknown dataset '" + std::string(dataset) + "'");
  }
  std::vector<std::optional<std::string>> labels(corpus.size());
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    labels[r] = resolver.Value(corpus.record(r), options.label_field);
  }
  std::vector<std::size_t> queries;
  for (std::size_t r : own) {
    if (labels[r]) queries.push_back(r);
  }
  if (queries.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "dataset '" + std::string(dataset) + "' has no samples with '" +
                    options.label_field + "'");
  }
  std::vector<std::size_t> pool;
  if (mode == RetrievalMode::kSameDataset) {
    pool = own;
  } else {
    pool.resize(corpus.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  const std::size_t k_max = *std::max_element(options.ks.begin(),
                                              options.ks.end());

  // Per query: relevance of the ranked list and R, with self excluded.
  std::vector<std::vector<char>> ranked(queries.size());
  std::vector<std::size_t> relevant(queries.size(), 0);
  ParallelFor(queries.size(), options.workers, [&](std::size_t qi) {
    const std::size_t q = queries[qi];
    std::vector<std::size_t> candidates;
    candidates.reserve(pool.size());
    for (std::size_t r : pool) {
      if (r == q) continue;
      candidates.push_back(r);
      if (labels[r] == labels[q]) ++relevant[qi];
    }
    const auto top = TopK(corpus, RowVector(corpus, q), candidates, k_max);
    for (const auto& t : top) ranked[qi].push_back(labels[t.row] == labels[q]);
  });

  std::vector<RetrievalEvalRow> rows;
  for (std::size_t k : options.ks) {
    RetrievalEvalRow row;
    row.dataset = std::string(dataset);
    row.mode = mode;
    row.k = k;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      if (relevant[qi] == 0) {
        ++row.n_no_relevant;
        continue;
      }
      const std::size_t len = ranked[qi].size();
      auto flags = std::make_unique<bool[]>(len);
      std::copy(ranked[qi].begin(), ranked[qi].end(), flags.get());
      const auto m = ComputeRetrievalMetrics({flags.get(), len}, relevant[qi], k);
      row.precision += m.precision;
      row.recall += *m.recall;
      row.recall_capped += *m.recall_capped;
      row.ap += m.ap;
      ++row.n_queries;
    }
    if (row.n_queries > 0) {
      const double n = static_cast<double>(row.n_queries);
      row.precision /= n;
      row.recall /= n;
      row.recall_capped /= n;
      row.ap /= n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

RetrievalAudit AuditRetrieval(const Corpus& corpus,
                              const FieldResolver& resolver,
                              const RetrievalEvalOptions& options) {
  resolver.Validate(options.label_field);
  RetrievalAudit out;
  for (const auto& dataset : corpus.Datasets()) {
    bool labeled = false;
    for (std::size_t r : corpus.RowsOfDataset(dataset)) {
      if (resolver.Value(corpus.record(r), options.label_field)) {
        labeled = true;
        break;
      }
    }
    if (!labeled) {
      out.skipped_datasets.push_back(dataset);
      continue;
    }
    for (auto mode : {RetrievalMode::kSameDataset, RetrievalMode::kAtlas}) {
      auto rows = EvalRetrieval(corpus, resolver, dataset, mode, options);
      out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
  }
  return out;
}

}  // namespace atlas
