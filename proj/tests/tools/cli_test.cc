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

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <sstream>

#include "atlas/corpus.h"
#include "atlas/fields.h"
#include "atlas/report.h"
#include "atlas/service.h"
#include "cli.h"
#include "support/support.h"

namespace atlas {
namespace {

using nlohmann::json;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Atlas(std::vector<std::string> args) {
  std::vector<const char*> argv = {"atlas"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> Inputs(const std::string& fixture) {
  const auto dir = testing::FixtureDir(fixture);
  return {"--embeddings_path", (dir / "embeddings.skmb").string(),
          "--metadata_path", (dir / "metadata.jsonl").string()};
}

std::vector<std::string> Cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

json ErrorOf(const CliResult& r) { return json::parse(r.err)["error"]; }

TEST(Cli, UsageErrorsExitOne) {
  auto r = Atlas({});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(ErrorOf(r)["code"], "usage");
  r = Atlas({"frobnicate"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  r = Atlas({"novelty", "--k_novelty", "ten"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(Atlas({"--help"}).code, 0);
}

TEST(Cli, InvalidParameterExitsOneBeforeLoading) {
  const auto r = Atlas({"novelty", "--alpha", "0.9", "--embeddings_path", "/missing",
                      "--metadata_path", "/missing", "--out_dir", "/tmp/x"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(ErrorOf(r)["code"], "invalid_argument");
  EXPECT_EQ(ErrorOf(r)["exit_code"], 1);
}

TEST(Cli, BadInputExitsTwoWithKind) {
  const auto dir = testing::ScratchDir("cli_bad_input");
  WriteTextFile(dir / "e.skmb", "XXXXjunk");
  WriteTextFile(dir / "m.jsonl", "");
  const auto r = Atlas({"ingest", "--embeddings_path", (dir / "e.skmb").string(),
                      "--metadata_path", (dir / "m.jsonl").string(), "--out_dir",
                      (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_EQ(ErrorOf(r)["kind"], "bad_magic");
  const auto missing = Atlas({"ingest", "--embeddings_path", (dir / "none.skmb").string(),
                            "--metadata_path", (dir / "m.jsonl").string(), "--out_dir",
                            (dir / "out").string()});
  EXPECT_EQ(missing.code, cli::kExitInput);
  EXPECT_EQ(ErrorOf(missing)["kind"], "io");
}

TEST(Cli, ConfigFileThenFlagsPrecedence) {
  const auto dir = testing::ScratchDir("cli_precedence");
  WriteTextFile(dir / "cfg.json", json{{"k_novelty", 3}, {"B", 20}, {"seed", 5}}.dump());
  const auto r = Atlas(Cat(Inputs("atlas"), {"novelty", "--config", (dir / "cfg.json").string(),
                                           "--B", "10", "--out_dir", (dir / "out").string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(ReadTextFile(dir / "out" / "manifest.json"));
  EXPECT_EQ(m["parameters"]["k_novelty"], 3);
  EXPECT_EQ(m["parameters"]["B"], 10);
  EXPECT_EQ(m["seed"], 5);
  const json n = json::parse(ReadTextFile(dir / "out" / "novelty.json"));
  EXPECT_EQ(n["parameters"]["B"], 10);
  EXPECT_EQ(n["parameters"]["k"], 3);
  WriteTextFile(dir / "bad.json", json{{"k_novelty", 3}, {"typo_key", 1}}.dump());
  const auto bad = Atlas(Cat(Inputs("atlas"), {"novelty", "--config", (dir / "bad.json").string(),
                                             "--out_dir", (dir / "out").string()}));
  EXPECT_EQ(bad.code, cli::kExitUsage);
}

TEST(Cli, OutDirFromEnvironment) {
  const auto dir = testing::ScratchDir("cli_env");
  ::setenv("ATLAS_OUT_DIR", dir.c_str(), 1);
  const auto r = Atlas(Cat(Inputs("atlas"), {"ingest"}));
  ::unsetenv("ATLAS_OUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "ingest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Cli, HolesOnCircleWithinFivePercentOfGolden) {
  const auto dir = testing::ScratchDir("cli_holes");
  const auto fx = testing::FixtureDir("circle");
  const auto r = Atlas(Cat(Inputs("circle"), {"holes", "--config", (fx / "config.json").string(),
                                            "--out_dir", dir.string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  const json golden = json::parse(ReadTextFile(fx / "golden.json"));
  const json holes = json::parse(ReadTextFile(dir / "holes.json"));
  ASSERT_FALSE(holes["holes"].empty());
  const double got = holes["holes"][0]["persistence"];
  const double want = golden["top_persistence"];
  EXPECT_NEAR(got, want, 0.05 * want);
  EXPECT_EQ(holes["pairs"].size(), golden["n_pairs"].get<std::size_t>());
}

TEST(Cli, SearchMatchesServiceQuery) {
  const auto fx = testing::FixtureDir("atlas");
  const LoadedCorpus lc = LoadCorpus(fx / "embeddings.skmb", fx / "metadata.jsonl");
  const auto sample = lc.corpus.record(17).id;
  const auto r = Atlas(Cat(Inputs("atlas"), {"search", "--sample_id", sample, "--k", "7",
                                           "--filter", "fst_group=I-II,III-IV"}));
  ASSERT_EQ(r.code, 0) << r.err;
  auto index = std::make_shared<AtlasIndex>(BuildAtlasIndex(lc.corpus, FieldResolver()));
  const AtlasService service(index);
  const json body = {{"sample_id", sample}, {"k", 7},
                     {"filters", {{"fst_group", {"I-II", "III-IV"}}}}};
  const HttpResponse resp = service.Query("application/json", body.dump());
  ASSERT_EQ(resp.status, 200);
  EXPECT_EQ(r.out, resp.body);
  EXPECT_EQ(json::parse(r.out)["results"].size(), 7u);
}

TEST(Cli, SearchErrors) {
  auto r = Atlas(Cat(Inputs("atlas"), {"search", "--sample_id", "nobody"}));
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_EQ(ErrorOf(r)["code"], "not_found");
  r = Atlas(Cat(Inputs("atlas"), {"search", "--sample_id", "derm_a-0001", "--filter", "label=none"}));
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_EQ(ErrorOf(r)["code"], "empty_pool");
  r = Atlas(Cat(Inputs("atlas"), {"search", "--filter", "label"}));
  EXPECT_EQ(r.code, cli::kExitUsage);
}

}  // namespace
}  // namespace atlas
