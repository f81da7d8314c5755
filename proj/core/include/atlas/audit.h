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

#ifndef ATLAS_AUDIT_H_
#define ATLAS_AUDIT_H_

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"
#include "atlas/fields.h"
#include "atlas/probes.h"
#include "atlas/report.h"

namespace atlas {

// Every knob of an audit run. JSON keys and CLI flags use these names.
struct RunConfig {
  std::string embeddings_path;
  std::string metadata_path;
  std::string out_dir;
  std::uint64_t seed = 42;
  int workers = 1;

  // novelty
  std::size_t k_novelty = 10;
  std::size_t B = 200;
  double alpha = 0.05;
  std::string novelty_group_field;  // empty: icd_block if blocks, else label
  std::string code_field = "icd";
  std::string coverage_stratify_field = "fst_group";
  int orphan_before = 0;  // 0: the latest year in the corpus
  std::string icd_blocks;

  // similarity
  std::size_t pca_dims_similarity = 64;
  double overlap_quantile = 0.05;

  // density
  std::size_t pca_dims_density = 16;
  std::size_t gmm_K = 16;
  std::size_t gmm_max_iter = 200;
  double gmm_tol = 1e-6;
  double density_q_low = 0.025;
  double density_q_high = 0.975;

  // holes
  std::size_t graph_k = 15;
  std::size_t k_b = 20;
  double boundary_alpha = 1.5;
  std::size_t k_top_holes = 5;
  std::size_t holes_dims = 0;  // 0: full normalized space
  std::size_t holes_max_points = 2000;
  bool holes_corrected = true;

  // probes
  double probe_lambda = 1.0;
  std::size_t probe_B = 1000;
  double eval_fraction = 0.2;
  std::vector<std::string> held_out_datasets;

  // retrieval
  std::vector<std::size_t> retrieval_k = {1, 5, 10};
  std::string label_field = "label";

  // report
  std::string baseline_config;
};

// Overlays the keys present in `doc` onto `base`. Unknown keys and
// ill-typed values throw Error(kInvalidArgument).
RunConfig RunConfigFromJson(const nlohmann::json& doc, RunConfig base = {});

// All parameters except file locations, for the manifest.
nlohmann::json RunConfigParameters(const RunConfig& config);

// Throws Error(kInvalidArgument) on non-positive counts, alpha outside
// (0, 0.5), and similar.
void ValidateRunConfig(const RunConfig& config);

struct AuditContext {
  RunConfig config;
  LoadedCorpus loaded;
  FieldResolver resolver;

  const Corpus& corpus() const { return loaded.corpus; }
};

AuditContext LoadAuditContext(const RunConfig& config);

ReportSection IngestSection(const AuditContext& ctx);
ReportSection NoveltySection(const AuditContext& ctx);
ReportSection SimilaritySection(const AuditContext& ctx);
ReportSection DensitySection(const AuditContext& ctx);
ReportSection HolesSection(const AuditContext& ctx);
ReportSection RetrievalSection(const AuditContext& ctx);

struct ProbeOutputs {
  ReportSection section;  // probes.json, probes.csv, imputed.jsonl
  Imputation imputation;
};
ProbeOutputs ProbesSection(const AuditContext& ctx);

// Null JSON when no baseline config is set. With an imputation, tables are
// emitted for both the original and the imputed records.
ReportSection DivergenceSection(const AuditContext& ctx,
                                const Imputation* imputation);

ManifestInfo MakeManifestInfo(const AuditContext& ctx,
                              std::string_view command);

}  // namespace atlas

#endif  // ATLAS_AUDIT_H_
