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

#ifndef ATLAS_FIELDS_H_
#define ATLAS_FIELDS_H_

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"

namespace atlas {

// Coarse Fitzpatrick groups: I-II, III-IV, V-VI.
std::string FstGroup(int fst);

// Age bins 0-17, 18-29, 30-49, 50-69, 70+.
std::string AgeBin(double age);

inline constexpr std::string_view kUnmappedBlock = "unmapped";

// ICD-10 block ranges, e.g. {"name": "D10-D36", "first": "D10",
// "last": "D36", "title": "Benign neoplasms"}. A code maps to the first block
// whose inclusive [first, last] range contains its three-character category.
class IcdBlockTable {
 public:
  struct Block {
    std::string name;
    std::string first;
    std::string last;
    std::string title;
  };

  IcdBlockTable() = default;
  explicit IcdBlockTable(std::vector<Block> blocks);

  static IcdBlockTable FromJson(const nlohmann::json& doc);
  static IcdBlockTable Load(const std::filesystem::path& path);

  // Block name, or "unmapped".
  std::string BlockOf(std::string_view code) const;

  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::vector<Block> blocks_;
};

// "B09.8" -> "B09"; empty when the code has no letter+two-digit prefix.
std::string IcdCategory(std::string_view code);

// Reads metadata fields by name, including derived ones (fst_group, age_bin,
// and icd_block when a block table is supplied). Unknown names throw
// Error(kNotFound) listing the valid fields.
class FieldResolver {
 public:
  FieldResolver() = default;
  explicit FieldResolver(IcdBlockTable blocks);

  std::optional<std::string> Value(const MetadataRecord& record,
                                   std::string_view field) const;

  void Validate(std::string_view field) const;
  bool IsValid(std::string_view field) const;
  std::vector<std::string> ValidFields() const;

  const std::optional<IcdBlockTable>& blocks() const { return blocks_; }

 private:
  std::optional<IcdBlockTable> blocks_;
};

// Base record fields that may be absent (imputation / coverage targets).
const std::vector<std::string>& OptionalFieldNames();

}  // namespace atlas

#endif  // ATLAS_FIELDS_H_
