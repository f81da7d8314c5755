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

#ifndef ATLAS_CORPUS_H_
#define ATLAS_CORPUS_H_

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace atlas {

using RowMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense n x d float32 matrix, row-major. The in-memory type admits n == 0
// (an empty deduplication result); the file reader requires n >= 1.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols);
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<float> row(std::size_t i) {
    return {values_.data() + i * cols_, cols_};
  }

  const std::vector<float>& values() const { return values_; }

  Eigen::Map<const RowMatrixXf> map() const {
    return {values_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }

  // Widened copy, for the linear-algebra heavy audits.
  Eigen::MatrixXd ToDouble() const;

  // Rows selected by index, in the given order.
  EmbeddingMatrix Select(std::span<const std::size_t> indices) const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) =
      default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

struct MetadataRecord {
  std::string id;
  std::string dataset;
  std::optional<int> year;
  std::optional<std::string> label;
  std::optional<std::string> icd;
  std::optional<int> fst;
  std::optional<double> age;
  std::optional<std::string> gender;
  std::optional<std::string> origin;
  std::optional<std::string> body_region;
  std::optional<std::string> modality;

  friend bool operator==(const MetadataRecord&, const MetadataRecord&) =
      default;
};

// Throws Error(kInvalidInput) naming the offending key.
MetadataRecord RecordFromJson(const nlohmann::json& object);
nlohmann::json RecordToJson(const MetadataRecord& record);

// Checks the per-record invariants (non-empty id, fst in 1..6, age >= 0,
// four-digit year).
void ValidateRecord(const MetadataRecord& record);

struct DedupReport {
  std::size_t kept = 0;
  std::size_t removed = 0;
  // (duplicate id, file index of the dropped row)
  std::vector<std::pair<std::string, std::size_t>> removed_ids;
};

// Aligned embeddings and metadata. Immutable once created.
class Corpus {
 public:
  // Validates alignment, id uniqueness, and, when `normalized`, unit rows.
  static Corpus Create(EmbeddingMatrix embeddings,
                       std::vector<MetadataRecord> records, bool normalized);

  const EmbeddingMatrix& embeddings() const { return embeddings_; }
  const std::vector<MetadataRecord>& records() const { return records_; }
  const MetadataRecord& record(std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return embeddings_.cols(); }
  bool normalized() const { return normalized_; }

  std::optional<std::size_t> IndexOf(std::string_view id) const;

  // Sorted distinct dataset names.
  std::vector<std::string> Datasets() const;

  // Row indices belonging to `dataset`, ascending.
  std::vector<std::size_t> RowsOfDataset(std::string_view dataset) const;

 private:
  Corpus() = default;

  EmbeddingMatrix embeddings_;
  std::vector<MetadataRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  bool normalized_ = false;
};

// Binary embedding file: "SKMB", u32 version, u64 n, u32 d, then n*d
// little-endian float32 values, row-major.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path);
EmbeddingMatrix DecodeEmbeddings(std::span<const std::uint8_t> bytes);
void SaveEmbeddings(const std::filesystem::path& path,
                    const EmbeddingMatrix& m);
std::vector<std::uint8_t> EncodeEmbeddings(const EmbeddingMatrix& m);

// JSON Lines, one record per line; blank lines are skipped.
std::vector<MetadataRecord> LoadMetadata(const std::filesystem::path& path);
void SaveMetadata(const std::filesystem::path& path,
                  std::span<const MetadataRecord> records);

struct Deduplicated {
  EmbeddingMatrix embeddings;
  std::vector<MetadataRecord> records;
  DedupReport report;
};

// Keeps the first occurrence of every id; rows move in lockstep with records.
Deduplicated Deduplicate(std::span<const MetadataRecord> records,
                         const EmbeddingMatrix& embeddings);

// Scales every row to unit Euclidean norm. Throws on an all-zero row.
EmbeddingMatrix NormalizeRows(const EmbeddingMatrix& m);

struct LoadedCorpus {
  Corpus corpus;
  DedupReport dedup;
  std::size_t raw_count = 0;
};

// load -> deduplicate -> normalize -> Corpus.
LoadedCorpus LoadCorpus(const std::filesystem::path& embeddings_path,
                        const std::filesystem::path& metadata_path);

}  // namespace atlas

#endif  // ATLAS_CORPUS_H_
