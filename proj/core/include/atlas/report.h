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

#ifndef ATLAS_REPORT_H_
#define ATLAS_REPORT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/fields.h"

namespace atlas {

// One reporting bin; `values` are the field values it collects (a bin may
// group several, e.g. several age bins under "18+").
struct BaselineBin {
  std::string name;
  std::vector<std::string> values;
  double fraction = 0.0;
  std::string source_note;
};

struct BaselineConfig {
  std::string field;
  std::vector<BaselineBin> bins;
  std::string source_note;

  // Throws Error(kInvalidInput) when fractions do not sum to 1 within 1e-6,
  // a value sits in two bins, or a bin is empty.
  static BaselineConfig FromJson(const nlohmann::json& doc);
};

// {"baselines": [...]} or a bare array.
std::vector<BaselineConfig> LoadBaselines(const std::filesystem::path& path);

struct DivergenceRow {
  std::string bin;
  std::size_t count = 0;
  double corpus_fraction = 0.0;
  double baseline_fraction = 0.0;
  double delta_pp = 0.0;  // 100 * (corpus - baseline)
  std::string source_note;
};

struct DivergenceTable {
  std::string field;
  std::size_t n = 0;          // records with the field
  std::size_t n_missing = 0;  // records without it
  std::vector<DivergenceRow> rows;  // config order, then "other" if used
  std::string source_note;
};

// Corpus fractions over the config bins; values outside every bin go to an
// "other" row with baseline 0. Throws Error(kInvalidInput) when no record
// has the field.
DivergenceTable CompareToBaseline(std::span<const MetadataRecord> records,
                                  const FieldResolver& resolver,
                                  const BaselineConfig& config);

nlohmann::json DivergenceJson(const DivergenceTable& table);

// Per-dataset counts plus, per field, coverage and value counts.
nlohmann::json CorpusSummaryJson(const Corpus& corpus,
                                 const FieldResolver& resolver);

std::string Sha256Hex(std::span<const std::uint8_t> bytes);
std::string Sha256Hex(const std::string& text);
std::string Sha256File(const std::filesystem::path& path);

// Stable serialization: sorted keys, two-space indent, trailing newline.
std::string CanonicalJson(const nlohmann::json& doc);

// CSV building blocks: RFC 4180 quoting and locale-free number formatting.
std::string CsvField(const std::string& s);
std::string CsvNumber(double x);         // shortest round-trip, "" if NaN
std::string CsvPercent(double pp);       // one decimal place
std::string CsvRow(const std::vector<std::string>& cells);

struct ReportSection {
  std::string name;      // file stem, e.g. "novelty"
  nlohmann::json json;   // null marks an empty optional section
  std::optional<std::string> csv;
  // Extra files written alongside, e.g. imputed JSON Lines.
  std::vector<std::pair<std::string, std::string>> attachments;
};

struct InputDigest {
  std::string role;  // "embeddings", "metadata", ...
  std::string name;  // file name only
  std::uintmax_t bytes = 0;
  std::string sha256;
};

InputDigest DigestInput(const std::string& role,
                        const std::filesystem::path& path);

struct ManifestInfo {
  std::string tool_version;
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<InputDigest> inputs;
};

// Writes each non-empty section as <name>.json (+ <name>.csv), then
// manifest.json listing version, seed, parameters, input digests, and the
// digest of every written file. Nothing time- or path-dependent is
// recorded, so identical inputs give byte-identical directories. Throws
// Error(kInvalidArgument) without a non-empty section and Error(kIo) when
// the directory cannot be written.
nlohmann::json EmitReport(std::span<const ReportSection> sections,
                          const ManifestInfo& info,
                          const std::filesystem::path& out_dir);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace atlas

#endif  // ATLAS_REPORT_H_
