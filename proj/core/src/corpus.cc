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

#include "atlas/corpus.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include "atlas/errors.h"

namespace atlas {
namespace {

constexpr char kMagic[4] = {'S', 'K', 'M', 'B'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

template <typename T>
void PutLittleEndian(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <typename T>
T GetLittleEndian(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::optional<std::string> OptString(const nlohmann::json& obj,
                                     const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("metadata key '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::optional<int> OptInt(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return it->get<int>();
  if (it->is_number_float()) {
    const double v = it->get<double>();
    if (std::isfinite(v) && v == std::floor(v)) return static_cast<int>(v);
  }
  throw Error(ErrorCode::kInvalidInput,
              std::string("metadata key '") + key + "' must be an integer");
}

std::optional<double> OptReal(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("metadata key '") + key + "' must be a number");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("metadata key '") + key + "' must be finite");
  }
  return v;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols,
                                 std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding value count does not match rows * cols");
  }
}

Eigen::MatrixXd EmbeddingMatrix::ToDouble() const {
  return map().cast<double>();
}

EmbeddingMatrix EmbeddingMatrix::Select(
    std::span<const std::size_t> indices) const {
  EmbeddingMatrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

MetadataRecord RecordFromJson(const nlohmann::json& obj) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kInvalidInput, "metadata line is not a JSON object");
  }
  MetadataRecord r;
  auto id = OptString(obj, "id");
  if (!id) throw Error(ErrorCode::kInvalidInput, "metadata record without id");
  r.id = std::move(*id);
  auto dataset = OptString(obj, "dataset");
  if (!dataset) {
    throw Error(ErrorCode::kInvalidInput,
                "metadata record '" + r.id + "' has no dataset");
  }
  r.dataset = std::move(*dataset);
  r.year = OptInt(obj, "year");
  r.label = OptString(obj, "label");
  r.icd = OptString(obj, "icd");
  r.fst = OptInt(obj, "fst");
  r.age = OptReal(obj, "age");
  r.gender = OptString(obj, "gender");
  r.origin = OptString(obj, "origin");
  r.body_region = OptString(obj, "body_region");
  r.modality = OptString(obj, "modality");
  ValidateRecord(r);
  return r;
}

nlohmann::json RecordToJson(const MetadataRecord& r) {
  nlohmann::json obj = nlohmann::json::object();
  obj["id"] = r.id;
  obj["dataset"] = r.dataset;
  if (r.year) obj["year"] = *r.year;
  if (r.label) obj["label"] = *r.label;
  if (r.icd) obj["icd"] = *r.icd;
  if (r.fst) obj["fst"] = *r.fst;
  if (r.age) obj["age"] = *r.age;
  if (r.gender) obj["gender"] = *r.gender;
  if (r.origin) obj["origin"] = *r.origin;
  if (r.body_region) obj["body_region"] = *r.body_region;
  if (r.modality) obj["modality"] = *r.modality;
  return obj;
}

void ValidateRecord(const MetadataRecord& r) {
  if (r.id.empty()) {
    throw Error(ErrorCode::kInvalidInput, "metadata record with empty id");
  }
  if (r.fst && (*r.fst < 1 || *r.fst > 6)) {
    throw Error(ErrorCode::kInvalidInput,
                "record '" + r.id + "': fst must be in 1..6");
  }
  if (r.age && !(*r.age >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "record '" + r.id + "': age must be non-negative");
  }
  if (r.year && (*r.year < 1000 || *r.year > 9999)) {
    throw Error(ErrorCode::kInvalidInput,
                "record '" + r.id + "': year must be a four-digit year");
  }
}

Corpus Corpus::Create(EmbeddingMatrix embeddings,
                      std::vector<MetadataRecord> records, bool normalized) {
  if (embeddings.rows() != records.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "record count " + std::to_string(records.size()) +
                    " does not match embedding rows " +
                    std::to_string(embeddings.rows()));
  }
  if (embeddings.cols() == 0) {
    throw Error(ErrorCode::kInvalidInput, "embedding dimension must be >= 1");
  }
  Corpus c;
  c.index_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    ValidateRecord(records[i]);
    if (!c.index_.emplace(records[i].id, i).second) {
      throw Error(ErrorCode::kInvalidInput,
                  "duplicate id '" + records[i].id + "' in corpus");
    }
  }
  for (float v : embeddings.values()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidInput, "non-finite embedding value");
    }
  }
  if (normalized) {
    for (std::size_t i = 0; i < embeddings.rows(); ++i) {
      double sq = 0.0;
      for (float v : embeddings.row(i)) sq += double{v} * v;
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
        throw Error(ErrorCode::kInvalidInput,
                    "row " + std::to_string(i) + " is not unit-norm");
      }
    }
  }
  c.embeddings_ = std::move(embeddings);
  c.records_ = std::move(records);
  c.normalized_ = normalized;
  return c;
}

std::optional<std::size_t> Corpus::IndexOf(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Corpus::Datasets() const {
  std::set<std::string> names;
  for (const auto& r : records_) names.insert(r.dataset);
  return {names.begin(), names.end()};
}

std::vector<std::size_t> Corpus::RowsOfDataset(std::string_view dataset) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].dataset == dataset) rows.push_back(i);
  }
  return rows;
}

std::vector<std::uint8_t> EncodeEmbeddings(const EmbeddingMatrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + m.values().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  PutLittleEndian<std::uint32_t>(out, kEmbeddingFormatVersion);
  PutLittleEndian<std::uint64_t>(out, m.rows());
  PutLittleEndian<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (float v : m.values()) PutLittleEndian<float>(out, v);
  return out;
}

EmbeddingMatrix DecodeEmbeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw LoadError(LoadErrorKind::kBadMagic,
                    "embedding file does not start with \"SKMB\"");
  }
  if (bytes.size() < kHeaderBytes) {
    throw LoadError(LoadErrorKind::kTruncatedHeader,
                    "embedding header is " + std::to_string(bytes.size()) +
                        " bytes, expected " + std::to_string(kHeaderBytes));
  }
  const auto version = GetLittleEndian<std::uint32_t>(bytes.data() + 4);
  if (version != kEmbeddingFormatVersion) {
    throw LoadError(LoadErrorKind::kVersionMismatch,
                    "embedding format version " + std::to_string(version) +
                        " is not supported (expected " +
                        std::to_string(kEmbeddingFormatVersion) + ")");
  }
  const auto n = GetLittleEndian<std::uint64_t>(bytes.data() + 8);
  const auto d = GetLittleEndian<std::uint32_t>(bytes.data() + 16);
  if (n == 0 || d == 0) {
    throw LoadError(LoadErrorKind::kInvalidDimensions,
                    "embedding header declares n=" + std::to_string(n) +
                        ", d=" + std::to_string(d));
  }
  const std::size_t payload = bytes.size() - kHeaderBytes;
  const long double expected = static_cast<long double>(n) * d * 4;
  if (static_cast<long double>(payload) < expected) {
    throw LoadError(LoadErrorKind::kTruncatedPayload,
                    "embedding payload holds " + std::to_string(payload / 4) +
                        " floats; header declares " + std::to_string(n) +
                        " x " + std::to_string(d));
  }
  if (static_cast<long double>(payload) > expected) {
    throw LoadError(LoadErrorKind::kTrailingBytes,
                    "embedding file has " +
                        std::to_string(payload - n * d * 4) +
                        " bytes past the declared payload");
  }
  std::vector<float> values(n * d);
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i, p += 4) {
    values[i] = GetLittleEndian<float>(p);
    if (!std::isfinite(values[i])) {
      throw LoadError(LoadErrorKind::kNonFinite,
                      "non-finite value at row " + std::to_string(i / d) +
                          ", column " + std::to_string(i % d));
    }
  }
  return EmbeddingMatrix(n, d, std::move(values));
}

EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(LoadErrorKind::kIo,
                    "cannot open embedding file " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return DecodeEmbeddings(bytes);
}

void SaveEmbeddings(const std::filesystem::path& path,
                    const EmbeddingMatrix& m) {
  const auto bytes = EncodeEmbeddings(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write embedding file " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "short write to " + path.string());
  }
}

std::vector<MetadataRecord> LoadMetadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open metadata file " + path.string());
  }
  std::vector<MetadataRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kInvalidInput,
                  path.filename().string() + ":" + std::to_string(line_no) +
                      ": " + e.what());
    }
    try {
      records.push_back(RecordFromJson(obj));
    } catch (const Error& e) {
      throw Error(e.code(), path.filename().string() + ":" +
                                std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void SaveMetadata(const std::filesystem::path& path,
                  std::span<const MetadataRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write metadata file " + path.string());
  }
  for (const auto& r : records) out << RecordToJson(r).dump() << '\n';
}

Deduplicated Deduplicate(std::span<const MetadataRecord> records,
                         const EmbeddingMatrix& embeddings) {
  if (records.size() != embeddings.rows()) {
    throw Error(ErrorCode::kInvalidInput,
                "record count does not match embedding rows");
  }
  Deduplicated out;
  std::unordered_set<std::string_view> seen;
  std::vector<std::size_t> keep;
  keep.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (seen.insert(records[i].id).second) {
      keep.push_back(i);
    } else {
      out.report.removed_ids.emplace_back(records[i].id, i);
    }
  }
  out.records.reserve(keep.size());
  for (std::size_t i : keep) out.records.push_back(records[i]);
  out.embeddings = embeddings.rows() == 0
                       ? EmbeddingMatrix(0, embeddings.cols())
                       : embeddings.Select(keep);
  out.report.kept = keep.size();
  out.report.removed = out.report.removed_ids.size();
  return out;
}

EmbeddingMatrix NormalizeRows(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = out.row(i);
    double sq = 0.0;
    for (float v : row) sq += double{v} * v;
    if (!(sq > 0.0)) {
      throw Error(ErrorCode::kInvalidInput,
                  "row " + std::to_string(i) + " has zero norm");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : row) v = static_cast<float>(v * inv);
  }
  return out;
}

LoadedCorpus LoadCorpus(const std::filesystem::path& embeddings_path,
                        const std::filesystem::path& metadata_path) {
  auto embeddings = LoadEmbeddings(embeddings_path);
  auto records = LoadMetadata(metadata_path);
  if (records.size() != embeddings.rows()) {
    throw Error(ErrorCode::kInvalidInput,
                metadata_path.filename().string() + " has " +
                    std::to_string(records.size()) + " records but " +
                    embeddings_path.filename().string() + " has " +
                    std::to_string(embeddings.rows()) + " rows");
  }
  const std::size_t raw = records.size();
  auto dedup = Deduplicate(records, embeddings);
  auto normalized = NormalizeRows(dedup.embeddings);
  return {Corpus::Create(std::move(normalized), std::move(dedup.records), true),
          std::move(dedup.report), raw};
}

}  // namespace atlas
