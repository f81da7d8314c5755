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

#include "atlas/fields.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include "atlas/errors.h"

namespace atlas {
namespace {

const std::vector<std::string>& BaseFields() {
  static const std::vector<std::string> fields = {
      "id",  "dataset", "year",   "label",       "icd",     "fst",
      "age", "gender",  "origin", "body_region", "modality"};
  return fields;
}

std::string FormatReal(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string FstGroup(int fst) {
  if (fst <= 2) return "I-II";
  if (fst <= 4) return "III-IV";
  return "V-VI";
}

std::string AgeBin(double age) {
  if (age < 18.0) return "0-17";
  if (age < 30.0) return "18-29";
  if (age < 50.0) return "30-49";
  if (age < 70.0) return "50-69";
  return "70+";
}

std::string IcdCategory(std::string_view code) {
  std::string out;
  for (char c : code) {
    if (c == ' ' || c == '\t') continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (out.size() == 3) break;
  }
  if (out.size() != 3 || !std::isalpha(static_cast<unsigned char>(out[0])) ||
      !std::isdigit(static_cast<unsigned char>(out[1])) ||
      !std::isalnum(static_cast<unsigned char>(out[2]))) {
    return {};
  }
  return out;
}

IcdBlockTable::IcdBlockTable(std::vector<Block> blocks)
    : blocks_(std::move(blocks)) {
  for (auto& b : blocks_) {
    b.first = IcdCategory(b.first);
    b.last = IcdCategory(b.last);
    if (b.first.empty() || b.last.empty() || b.last < b.first) {
      throw Error(ErrorCode::kInvalidInput,
                  "ICD block '" + b.name + "' has an invalid range");
    }
  }
}

IcdBlockTable IcdBlockTable::FromJson(const nlohmann::json& doc) {
  const nlohmann::json& list = doc.is_object() ? doc.at("blocks") : doc;
  if (!list.is_array()) {
    throw Error(ErrorCode::kInvalidInput, "ICD block table must be an array");
  }
  std::vector<Block> blocks;
  for (const auto& item : list) {
    Block b;
    b.first = item.at("first").get<std::string>();
    b.last = item.at("last").get<std::string>();
    b.name = item.value("name", b.first + "-" + b.last);
    b.title = item.value("title", std::string());
    blocks.push_back(std::move(b));
  }
  return IcdBlockTable(std::move(blocks));
}

IcdBlockTable IcdBlockTable::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open ICD block table " + path.string());
  }
  try {
    return FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput,
                path.filename().string() + ": " + e.what());
  }
}

std::string IcdBlockTable::BlockOf(std::string_view code) const {
  const std::string cat = IcdCategory(code);
  if (cat.empty()) return std::string(kUnmappedBlock);
  for (const auto& b : blocks_) {
    if (cat >= b.first && cat <= b.last) return b.name;
  }
  return std::string(kUnmappedBlock);
}

FieldResolver::FieldResolver(IcdBlockTable blocks) : blocks_(std::move(blocks)) {}

std::vector<std::string> FieldResolver::ValidFields() const {
  std::vector<std::string> out = BaseFields();
  out.push_back("fst_group");
  out.push_back("age_bin");
  if (blocks_) out.push_back("icd_block");
  return out;
}

bool FieldResolver::IsValid(std::string_view field) const {
  const auto fields = ValidFields();
  return std::find(fields.begin(), fields.end(), field) != fields.end();
}

void FieldResolver::Validate(std::string_view field) const {
  if (IsValid(field)) return;
  std::string msg = "unknown field '" + std::string(field) + "'; valid fields:";
  for (const auto& f : ValidFields()) msg += " " + f;
  throw Error(ErrorCode::kNotFound, msg);
}

std::optional<std::string> FieldResolver::Value(const MetadataRecord& r,
                                                std::string_view field) const {
  if (field == "id") return r.id;
  if (field == "dataset") return r.dataset;
  if (field == "year") {
    if (!r.year) return std::nullopt;
    return std::to_string(*r.year);
  }
  if (field == "label") return r.label;
  if (field == "icd") return r.icd;
  if (field == "fst") {
    if (!r.fst) return std::nullopt;
    return std::to_string(*r.fst);
  }
  if (field == "age") {
    if (!r.age) return std::nullopt;
    return FormatReal(*r.age);
  }
  if (field == "gender") return r.gender;
  if (field == "origin") return r.origin;
  if (field == "body_region") return r.body_region;
  if (field == "modality") return r.modality;
  if (field == "fst_group") {
    if (!r.fst) return std::nullopt;
    return FstGroup(*r.fst);
  }
  if (field == "age_bin") {
    if (!r.age) return std::nullopt;
    return AgeBin(*r.age);
  }
  if (field == "icd_block" && blocks_) {
    if (!r.icd) return std::nullopt;
    return blocks_->BlockOf(*r.icd);
  }
  Validate(field);
  return std::nullopt;
}

const std::vector<std::string>& OptionalFieldNames() {
  static const std::vector<std::string> fields = {
      "year",   "label",  "icd",         "fst",     "age",
      "gender", "origin", "body_region", "modality"};
  return fields;
}

}  // namespace atlas
