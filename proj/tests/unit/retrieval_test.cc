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


#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "atlas/errors.h"
#include "atlas/fields.h"
#include "atlas/retrieval.h"
#include "oracles/oracles.h"
#include "support/support.h"

namespace atlas {
namespace {

using nlohmann::json;

Corpus Small() {
  Rng rng(1);
  testing::CorpusBuilder b(4);
  for (int i = 0; i < 30; ++i) {
    auto& r = b.Add(testing::Gaussian(rng, 4), i % 3 ? "a" : "b", 2020);
    if (i % 2) r.label = i % 4 == 1 ? "x" : "y";
    r.fst = 1 + i % 6;
  }
  return b.Build();
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kComputation;
}

TEST(QueryJson, Forms) {
  auto q = QueryFromJson(json{{"sample_id", "a-1"}, {"k", 3}});
  EXPECT_EQ(q.sample_id, "a-1");
  EXPECT_EQ(q.k, 3u);
  q = QueryFromJson(json{{"vector", {1, 0}}, {"filters", {{"label", "x"}, {"fst_group", {"I-II", "V-VI"}}}}});
  EXPECT_EQ(q.filters["label"], (std::set<std::string>{"x"}));
  EXPECT_EQ(q.filters["fst_group"].size(), 2u);
  EXPECT_EQ(QueryFromJson(json{{"sample_id", "s"}, {"pool", "b"}}).pool_dataset, "b");
  EXPECT_FALSE(QueryFromJson(json{{"sample_id", "s"}, {"pool", "all"}}).pool_dataset);
  EXPECT_EQ(QueryFromJson(json{{"sample_id", "s"}, {"pool", {{"dataset", "b"}}}}).pool_dataset, "b");
  EXPECT_EQ(QueryFromJson(json{{"sample_id", "s"}, {"pool", {"p", "q"}}}).pool_ids->size(), 2u);
  EXPECT_EQ(QueryFromJson(json{{"sample_id", "s"}, {"pool", {{"ids", {"p"}}}}}).pool_ids->size(), 1u);
}

TEST(QueryJson, Rejects) {
  for (const json& bad : {json::array(), json{{"k", 3}}, json{{"sample_id", "a"}, {"vector", {1}}},
                          json{{"sample_id", "a"}, {"k", 0}}, json{{"sample_id", "a"}, {"k", -1}},
                          json{{"sample_id", 3}}, json{{"vector", {"x"}}},
                          json{{"sample_id", "a"}, {"bogus", 1}}}) {
    EXPECT_EQ(CodeOf([&] { QueryFromJson(bad); }), ErrorCode::kInvalidArgument) << bad.dump();
  }
}

TEST(Search, ErrorsAreTyped) {
  const Corpus c = Small();
  const FieldResolver f;
  RetrievalQuery q;
  q.sample_id = "nope";
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kNotFound);
  q.sample_id = "a-1";
  q.pool_dataset = "zzz";
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kNotFound);
  q.pool_dataset.reset();
  q.filters["colour"] = {"red"};
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kNotFound);
  q.filters.clear();
  q.filters["label"] = {"never"};
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kEmptyPool);
  q.filters.clear();
  q.sample_id.reset();
  q.vector = std::vector<double>{1, 0};
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kInvalidArgument);
  q.vector = std::vector<double>{0, 0, 0, 0};
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kInvalidArgument);
  q.vector.reset();
  q.sample_id = "a-1";
  q.pool_ids = std::vector<std::string>{"a-2", "missing"};
  EXPECT_EQ(CodeOf([&] { Search(c, f, q); }), ErrorCode::kNotFound);
}

TEST(Search, SelfExcludedAndPoolIds) {
  const Corpus c = Small();
  const FieldResolver f;
  RetrievalQuery q;
  q.sample_id = "a-1";
  q.k = 100;
  const auto hits = Search(c, f, q);
  EXPECT_EQ(hits.size(), c.size() - 1);
  for (const auto& h : hits) EXPECT_NE(h.id, "a-1");
  q.pool_ids = std::vector<std::string>{"a-2", "b-3", "a-1"};
  EXPECT_EQ(Search(c, f, q).size(), 2u);
  const auto j = SearchResultJson(c, Search(c, f, q));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_TRUE(j[0].contains("distance"));
  EXPECT_TRUE(j[0].contains("metadata"));
}

TEST(Search, DerivedFieldFilter) {
  const Corpus c = Small();
  RetrievalQuery q;
  q.sample_id = "a-1";
  q.k = 100;
  q.filters["fst_group"] = {"V-VI"};
  for (const auto& h : Search(c, FieldResolver(), q)) EXPECT_GE(*c.record(h.row).fst, 5);
}

// Property: metrics agree with brute-force definitions.
TEST(Metrics, MatchBruteForce) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t len = 1 + rng.UniformIndex(12);
    std::vector<bool> r(len);
    std::size_t hits_total = 0;
    for (std::size_t i = 0; i < len; ++i) {
      r[i] = rng.Uniform() < 0.4;
      hits_total += r[i];
    }
    const std::size_t R = hits_total + rng.UniformIndex(4);
    if (R == 0) continue;
    const std::size_t k = 1 + rng.UniformIndex(len);
    auto flags = std::make_unique<bool[]>(len);
    std::copy(r.begin(), r.end(), flags.get());
    const auto m = ComputeRetrievalMetrics({flags.get(), len}, R, k);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += r[i];
    EXPECT_DOUBLE_EQ(m.precision, double(hits) / double(k));
    EXPECT_DOUBLE_EQ(*m.recall, double(hits) / double(R));
    EXPECT_DOUBLE_EQ(*m.recall_capped, double(hits) / double(std::min(R, k)));
    EXPECT_NEAR(m.ap, oracle::AveragePrecision(r, R, k), 1e-15);
    EXPECT_LE(m.ap, 1.0);
  }
}

TEST(Metrics, NoRelevantLeavesRecallUnset) {
  const bool r[] = {false, false};
  const auto m = ComputeRetrievalMetrics(r, 0, 2);
  EXPECT_FALSE(m.recall.has_value());
  EXPECT_EQ(m.ap, 0.0);
  EXPECT_THROW(ComputeRetrievalMetrics(r, 1, 0), Error);
}

TEST(EvalRetrieval, AuditCoversLabeledDatasets) {
  const Corpus c = Small();
  RetrievalEvalOptions opt;
  opt.ks = {1, 3};
  const auto audit = AuditRetrieval(c, FieldResolver(), opt);
  EXPECT_EQ(audit.rows.size(), 2u * 2u * 2u);
  for (const auto& row : audit.rows) {
    EXPECT_GE(row.precision, 0.0);
    EXPECT_LE(row.precision, 1.0);
    EXPECT_LE(row.recall_capped, 1.0);
  }
  EXPECT_EQ(RetrievalModeName(RetrievalMode::kSameDataset), "same-dataset");
}

}  // namespace
}  // namespace atlas
