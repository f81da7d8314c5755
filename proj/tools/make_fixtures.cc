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


// Writes the bundled synthetic fixtures:
//   <root>/atlas   four datasets over two years, d = 32, partial metadata
//   <root>/circle  30 jittered points on the unit circle
// Output depends only on the seed, so the checked-in files can be rebuilt.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/report.h"
#include "atlas/rng.h"

namespace {

using atlas::MetadataRecord;
using atlas::Rng;

constexpr std::size_t kDim = 32;

struct Diagnosis {
  const char* label;
  const char* icd;
};

constexpr Diagnosis kDiagnoses[] = {
    {"melanoma", "C43.9"},
    {"basal cell carcinoma", "C44.91"},
    {"psoriasis vulgaris", "L40.0"},
    {"atopic dermatitis", "L20.9"},
    {"seborrheic keratosis", "L82.1"},
    {"acne vulgaris", "L70.0"},
    {"tinea corporis", "B35.4"},
};

struct DatasetSpec {
  const char* name;
  const char* origin;  // empty: not recorded
  const char* modality;
  std::size_t n;
  int first_year;
  int last_year;
  double fst_rate;
  double age_rate;
  double gender_rate;
  double region_rate;
};

constexpr DatasetSpec kDatasets[] = {
    {"derm_a", "US", "dermoscopic", 160, 2019, 2019, 0.6, 0.8, 0.9, 0.7},
    {"derm_b", "DE", "dermoscopic", 140, 2019, 2020, 0.0, 0.7, 0.8, 0.6},
    {"clinic_c", "BR", "clinical", 150, 2019, 2020, 0.7, 0.5, 0.6, 0.4},
    {"atlas_d", "", "clinical", 130, 2020, 2020, 0.4, 0.3, 0.5, 0.3},
};

constexpr const char* kRegions[] = {"head", "trunk", "upper limb",
                                    "lower limb"};

std::vector<double> RandomDirection(Rng& rng) {
  std::vector<double> v(kDim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.Normal();
    norm += x * x;
  }
  for (double& x : v) x /= std::sqrt(norm);
  return v;
}

void Axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void WriteConfig(const std::filesystem::path& path, const nlohmann::json& c) {
  atlas::WriteTextFile(path, atlas::CanonicalJson(c));
}

void MakeAtlas(const std::filesystem::path& dir, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> label_dirs;
  for (std::size_t i = 0; i < std::size(kDiagnoses); ++i) {
    label_dirs.push_back(RandomDirection(rng));
  }
  std::vector<std::vector<double>> dataset_dirs;
  for (std::size_t i = 0; i < std::size(kDatasets); ++i) {
    dataset_dirs.push_back(RandomDirection(rng));
  }
  const auto fst_dir = RandomDirection(rng);
  const auto age_dir = RandomDirection(rng);
  const auto gender_dir = RandomDirection(rng);
  std::vector<std::vector<double>> region_dirs;
  for (std::size_t i = 0; i < std::size(kRegions); ++i) {
    region_dirs.push_back(RandomDirection(rng));
  }

  std::vector<MetadataRecord> records;
  std::vector<float> values;
  for (std::size_t di = 0; di < std::size(kDatasets); ++di) {
    const DatasetSpec& ds = kDatasets[di];
    for (std::size_t s = 0; s < ds.n; ++s) {
      MetadataRecord r;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04zu", ds.name, s);
      r.id = id;
      r.dataset = ds.name;
      const int span = ds.last_year - ds.first_year + 1;
      r.year = ds.first_year +
               static_cast<int>(s * static_cast<std::size_t>(span) / ds.n);
      // atlas_d brings a diagnosis nobody else has, which makes its year
      // measurably novel.
      std::size_t label = rng.UniformIndex(std::size(kDiagnoses) - 1);
      if (di == 3 && rng.Uniform() < 0.5) label = std::size(kDiagnoses) - 1;
      if (rng.Uniform() < 0.9) {
        r.label = kDiagnoses[label].label;
        r.icd = kDiagnoses[label].icd;
      }
      const int fst = 1 + static_cast<int>(rng.UniformIndex(6));
      const double age = std::round(5.0 + 80.0 * rng.Uniform());
      const bool female = rng.Uniform() < 0.5;
      const std::size_t region = rng.UniformIndex(std::size(kRegions));
      if (rng.Uniform() < ds.fst_rate) r.fst = fst;
      if (rng.Uniform() < ds.age_rate) r.age = age;
      if (rng.Uniform() < ds.gender_rate) r.gender = female ? "female" : "male";
      if (rng.Uniform() < ds.region_rate) r.body_region = kRegions[region];
      if (*ds.origin) r.origin = ds.origin;
      r.modality = ds.modality;

      std::vector<double> v(kDim, 0.0);
      Axpy(v, 3.0, label_dirs[label]);
      Axpy(v, 1.2, dataset_dirs[di]);
      Axpy(v, 0.5 * (fst - 3.5), fst_dir);
      Axpy(v, (age - 45.0) / 25.0, age_dir);
      Axpy(v, female ? 0.8 : -0.8, gender_dir);
      Axpy(v, 0.9, region_dirs[region]);
      for (double& x : v) x += 0.35 * rng.Normal();
      for (double x : v) values.push_back(static_cast<float>(x));
      records.push_back(std::move(r));
    }
  }
  // A few re-exported samples: same ids, later rows, which ingestion drops.
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t src = 10 * s + 3;
    records.push_back(records[src]);
    for (std::size_t j = 0; j < kDim; ++j) {
      values.push_back(values[src * kDim + j] * 2.0f);
    }
  }
  const std::size_t n = records.size();
  std::filesystem::create_directories(dir);
  atlas::SaveEmbeddings(dir / "embeddings.skmb",
                        atlas::EmbeddingMatrix(n, kDim, std::move(values)));
  atlas::SaveMetadata(dir / "metadata.jsonl", records);
}

void MakeCircle(const std::filesystem::path& dir, std::uint64_t seed) {
  Rng rng(seed);
  constexpr std::size_t kPoints = 30;
  std::vector<float> values;
  std::vector<MetadataRecord> records;
  for (std::size_t i = 0; i < kPoints; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) /
                             kPoints +
                         0.04 * (rng.Uniform() - 0.5);
    values.push_back(static_cast<float>(std::cos(theta)));
    values.push_back(static_cast<float>(std::sin(theta)));
    MetadataRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "ring-%02zu", i);
    r.id = id;
    r.dataset = "ring";
    r.year = 2020;
    r.label = "ring sample";
    records.push_back(std::move(r));
  }
  std::filesystem::create_directories(dir);
  atlas::SaveEmbeddings(dir / "embeddings.skmb",
                        atlas::EmbeddingMatrix(kPoints, 2, std::move(values)));
  atlas::SaveMetadata(dir / "metadata.jsonl", records);
  WriteConfig(dir / "config.json", {{"graph_k", 4},
                                    {"k_b", 3},
                                    {"k_top_holes", 3},
                                    {"holes_corrected", true}});
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_fixtures <fixtures-root>\n");
    return 1;
  }
  const std::filesystem::path root = argv[1];
  MakeAtlas(root / "atlas", 20240601);
  MakeCircle(root / "circle", 7);
  return 0;
}
