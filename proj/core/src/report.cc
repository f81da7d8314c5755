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

#include "atlas/report.h"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "atlas/errors.h"

namespace atlas {
namespace fs = std::filesystem;

BaselineConfig BaselineConfig::FromJson(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("field") || !doc["field"].is_string() ||
      !doc.contains("bins") || !doc["bins"].is_array()) {
    throw Error(ErrorCode::kInvalidInput,
                "baseline config needs a string 'field' and a 'bins' array");
  }
  BaselineConfig c;
  c.field = doc["field"].get<std::string>();
  c.source_note = doc.value("source_note", "");
  std::set<std::string> seen;
  double total = 0.0;
  for (const auto& b : doc["bins"]) {
    BaselineBin bin;
    if (!b.is_object() || !b.contains("bin") || !b["bin"].is_string() ||
        !b.contains("fraction") || !b["fraction"].is_number()) {
      throw Error(ErrorCode::kInvalidInput,
                  "baseline '" + c.field +
                      "': each bin needs 'bin' and numeric 'fraction'");
    }
    bin.name = b["bin"].get<std::string>();
    bin.fraction = b["fraction"].get<double>();
    bin.source_note = b.value("source_note", "");
    if (b.contains("values")) {
      for (const auto& v : b["values"]) {
        bin.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else {
      bin.values.push_back(bin.name);
    }
    if (bin.values.empty()) {
      throw Error(ErrorCode::kInvalidInput,
                  "baseline '" + c.field + "': bin '" + bin.name +
                      "' has no values");
    }
    for (const auto& v : bin.values) {
      if (!seen.insert(v).second) {
        throw Error(ErrorCode::kInvalidInput,
                    "baseline '" + c.field + "': value '" + v +
                        "' appears in more than one bin");
      }
    }
    if (!(bin.fraction >= 0.0 && bin.fraction <= 1.0)) {
      throw Error(ErrorCode::kInvalidInput,
                  "baseline '" + c.field + "': fraction of bin '" + bin.name +
                      "' must lie in [0, 1]");
    }
    total += bin.fraction;
    c.bins.push_back(std::move(bin));
  }
  if (c.bins.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "baseline '" + c.field + "' has no bins");
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidInput,
                "baseline '" + c.field + "' fractions sum to " +
                    std::to_string(total) + ", expected 1");
  }
  return c;
}

std::vector<BaselineConfig> LoadBaselines(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ReadTextFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput,
                path.string() + ": invalid JSON: " + e.what());
  }
  const nlohmann::json& list = doc.is_object() ? doc.value("baselines", nlohmann::json::array()) : doc;
  if (!list.is_array()) {
    throw Error(ErrorCode::kInvalidInput,
                path.string() + ": expected a 'baselines' array");
  }
  std::vector<BaselineConfig> out;
  for (const auto& b : list) out.push_back(BaselineConfig::FromJson(b));
  return out;
}

DivergenceTable CompareToBaseline(std::span<const MetadataRecord> records,
                                  const FieldResolver& resolver,
                                  const BaselineConfig& config) {
  resolver.Validate(config.field);
  DivergenceTable t;
  t.field = config.field;
  t.source_note = config.source_note;
  std::map<std::string, std::size_t> bin_of;
  for (std::size_t b = 0; b < config.bins.size(); ++b) {
    for (const auto& v : config.bins[b].values) bin_of[v] = b;
  }
  std::vector<std::size_t> counts(config.bins.size(), 0);
  std::size_t other = 0;
  for (const auto& r : records) {
    const auto v = resolver.Value(r, config.field);
    if (!v) {
      ++t.n_missing;
      continue;
    }
    ++t.n;
    auto it = bin_of.find(*v);
    if (it == bin_of.end()) {
      ++other;
    } else {
      ++counts[it->second];
    }
  }
  if (t.n == 0) {
    throw Error(ErrorCode::kInvalidInput,
                "field '" + config.field + "' is empty; nothing to compare");
  }
  const double n = static_cast<double>(t.n);
  for (std::size_t b = 0; b < config.bins.size(); ++b) {
    DivergenceRow row;
    row.bin = config.bins[b].name;
    row.count = counts[b];
    row.corpus_fraction = static_cast<double>(counts[b]) / n;
    row.baseline_fraction = config.bins[b].fraction;
    row.delta_pp = 100.0 * (row.corpus_fraction - row.baseline_fraction);
    row.source_note = config.bins[b].source_note;
    t.rows.push_back(std::move(row));
  }
  if (other > 0) {
    DivergenceRow row;
    row.bin = "other";
    row.count = other;
    row.corpus_fraction = static_cast<double>(other) / n;
    row.delta_pp = 100.0 * row.corpus_fraction;
    t.rows.push_back(std::move(row));
  }
  return t;
}

nlohmann::json DivergenceJson(const DivergenceTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"bin", r.bin},
                    {"count", r.count},
                    {"corpus_fraction", r.corpus_fraction},
                    {"baseline_fraction", r.baseline_fraction},
                    {"delta_pp", r.delta_pp},
                    {"source_note", r.source_note}});
  }
  return {{"field", t.field},
          {"n", t.n},
          {"n_missing", t.n_missing},
          {"source_note", t.source_note},
          {"rows", rows}};
}

nlohmann::json CorpusSummaryJson(const Corpus& corpus,
                                 const FieldResolver& resolver) {
  nlohmann::json datasets = nlohmann::json::object();
  for (const auto& d : corpus.Datasets()) {
    datasets[d] = corpus.RowsOfDataset(d).size();
  }
  std::vector<std::string> fields = OptionalFieldNames();
  fields.push_back("fst_group");
  fields.push_back("age_bin");
  if (resolver.blocks()) fields.push_back("icd_block");
  nlohmann::json per_field = nlohmann::json::object();
  const double n = static_cast<double>(corpus.size());
  for (const auto& f : fields) {
    std::size_t present = 0;
    std::map<std::string, std::size_t> values;
    for (const auto& r : corpus.records()) {
      const auto v = resolver.Value(r, f);
      if (!v) continue;
      ++present;
      if (f != "age") ++values[*v];
    }
    nlohmann::json entry = {{"present", present},
                            {"coverage", n > 0 ? present / n : 0.0}};
    if (f != "age") entry["values"] = values;
    per_field[f] = std::move(entry);
  }
  return {{"n_samples", corpus.size()},
          {"dim", corpus.dim()},
          {"datasets", datasets},
          {"fields", per_field}};
}

std::string Sha256Hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kComputation, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string Sha256Hex(const std::string& text) {
  return Sha256Hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string Sha256File(const fs::path& path) {
  return Sha256Hex(ReadTextFile(path));
}

std::string CanonicalJson(const nlohmann::json& doc) {
  return doc.dump(2) + "\n";
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string CsvNumber(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string CsvPercent(double pp) {
  char buf[64];
  // Round half away from zero on the decimal value, and avoid "-0.0".
  double r = std::round(pp * 10.0) / 10.0;
  if (r == 0.0) r = 0.0;
  std::snprintf(buf, sizeof(buf), "%.1f", r);
  return buf;
}

std::string CsvRow(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(',');
    out += cells[i];
  }
  return out + "\n";
}

InputDigest DigestInput(const std::string& role, const fs::path& path) {
  const std::string bytes = ReadTextFile(path);
  return {role, path.filename().string(), bytes.size(), Sha256Hex(bytes)};
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) {
    throw Error(ErrorCode::kIo, "failed writing " + path.string());
  }
}

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json EmitReport(std::span<const ReportSection> sections,
                          const ManifestInfo& info, const fs::path& out_dir) {
  std::vector<const ReportSection*> present;
  for (const auto& s : sections) {
    if (!s.json.is_null()) present.push_back(&s);
  }
  if (present.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no report sections to emit");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw Error(ErrorCode::kIo,
                "cannot create output directory " + out_dir.string());
  }
  nlohmann::json files = nlohmann::json::object();
  nlohmann::json names = nlohmann::json::array();
  const auto write = [&](const std::string& name, const std::string& text) {
    WriteTextFile(out_dir / name, text);
    files[name] = {{"bytes", text.size()}, {"sha256", Sha256Hex(text)}};
  };
  for (const auto* s : present) {
    names.push_back(s->name);
    write(s->name + ".json", CanonicalJson(s->json));
    if (s->csv) write(s->name + ".csv", *s->csv);
    for (const auto& [name, text] : s->attachments) write(name, text);
  }
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& in : info.inputs) {
    inputs.push_back({{"role", in.role},
                      {"name", in.name},
                      {"bytes", in.bytes},
                      {"sha256", in.sha256}});
  }
  nlohmann::json manifest = {{"tool", "atlas"},
                             {"tool_version", info.tool_version},
                             {"command", info.command},
                             {"seed", info.seed},
                             {"parameters", info.parameters},
                             {"inputs", inputs},
                             {"sections", names},
                             {"files", files}};
  WriteTextFile(out_dir / "manifest.json", CanonicalJson(manifest));
  return manifest;
}

}  // namespace atlas
