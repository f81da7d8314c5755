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

#include "atlas/audit.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "atlas/density.h"
#include "atlas/errors.h"
#include "atlas/geometry.h"
#include "atlas/novelty.h"
#include "atlas/retrieval.h"
#include "atlas/similarity.h"
#include "atlas/stats.h"
#include "atlas/topology.h"
#include "atlas/version.h"

namespace atlas {
namespace {

using nlohmann::json;

template <typename T>
T Get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument,
                "config key '" + key + "' has the wrong type");
  }
}

std::size_t GetCount(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

json OptionalNumber(const std::optional<double>& x) {
  return x ? json(*x) : json(nullptr);
}

json FiniteOrNull(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void Positive(std::size_t v, const char* name) {
  if (v == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + " must be positive");
  }
}

std::string NoveltyGroupField(const AuditContext& ctx) {
  if (!ctx.config.novelty_group_field.empty()) {
    return ctx.config.novelty_group_field;
  }
  return ctx.resolver.blocks() ? "icd_block" : "label";
}

bool FieldHasValues(const AuditContext& ctx, std::string_view field) {
  for (const auto& r : ctx.corpus().records()) {
    if (ctx.resolver.Value(r, field)) return true;
  }
  return false;
}

json ProbeReportJson(const ProbeReport& r) {
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"label", c.label},
                         {"support", c.support},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1}});
  }
  json out = {{"metric", r.metric_name}, {"point", r.point},
              {"ci_low", r.ci_low},      {"ci_high", r.ci_high},
              {"n", r.n},                {"draws", r.draws}};
  if (!r.per_class.empty()) out["per_class"] = per_class;
  return out;
}

}  // namespace

RunConfig RunConfigFromJson(const json& doc, RunConfig c) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  }
  using Setter = std::function<void(const json&, const std::string&)>;
  const auto str = [](std::string& dst) -> Setter {
    return [&dst](const json& v, const std::string& k) {
      dst = Get<std::string>(v, k);
    };
  };
  const auto count = [](std::size_t& dst) -> Setter {
    return [&dst](const json& v, const std::string& k) {
      dst = GetCount(v, k);
    };
  };
  const auto real = [](double& dst) -> Setter {
    return [&dst](const json& v, const std::string& k) {
      if (!v.is_number()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "config key '" + k + "' must be a number");
      }
      dst = v.get<double>();
    };
  };
  const std::map<std::string, Setter> setters = {
      {"embeddings_path", str(c.embeddings_path)},
      {"metadata_path", str(c.metadata_path)},
      {"out_dir", str(c.out_dir)},
      {"seed",
       [&](const json& v, const std::string& k) {
         if (!v.is_number_unsigned()) {
           throw Error(ErrorCode::kInvalidArgument,
                       "config key '" + k + "' must be a non-negative integer");
         }
         c.seed = v.get<std::uint64_t>();
       }},
      {"workers",
       [&](const json& v, const std::string& k) {
         c.workers = static_cast<int>(GetCount(v, k));
       }},
      {"k_novelty", count(c.k_novelty)},
      {"B", count(c.B)},
      {"alpha", real(c.alpha)},
      {"novelty_group_field", str(c.novelty_group_field)},
      {"code_field", str(c.code_field)},
      {"coverage_stratify_field", str(c.coverage_stratify_field)},
      {"orphan_before",
       [&](const json& v, const std::string& k) {
         c.orphan_before = Get<int>(v, k);
       }},
      {"icd_blocks", str(c.icd_blocks)},
      {"pca_dims_similarity", count(c.pca_dims_similarity)},
      {"overlap_quantile", real(c.overlap_quantile)},
      {"pca_dims_density", count(c.pca_dims_density)},
      {"gmm_K", count(c.gmm_K)},
      {"gmm_max_iter", count(c.gmm_max_iter)},
      {"gmm_tol", real(c.gmm_tol)},
      {"density_q_low", real(c.density_q_low)},
      {"density_q_high", real(c.density_q_high)},
      {"graph_k", count(c.graph_k)},
      {"k_b", count(c.k_b)},
      {"boundary_alpha", real(c.boundary_alpha)},
      {"k_top_holes", count(c.k_top_holes)},
      {"holes_dims", count(c.holes_dims)},
      {"holes_max_points", count(c.holes_max_points)},
      {"holes_corrected",
       [&](const json& v, const std::string& k) {
         c.holes_corrected = Get<bool>(v, k);
       }},
      {"probe_lambda", real(c.probe_lambda)},
      {"probe_B", count(c.probe_B)},
      {"eval_fraction", real(c.eval_fraction)},
      {"held_out_datasets",
       [&](const json& v, const std::string& k) {
         c.held_out_datasets = Get<std::vector<std::string>>(v, k);
       }},
      {"retrieval_k",
       [&](const json& v, const std::string& k) {
         if (!v.is_array()) {
           throw Error(ErrorCode::kInvalidArgument,
                       "config key '" + k + "' must be an array");
         }
         c.retrieval_k.clear();
         for (const auto& x : v) c.retrieval_k.push_back(GetCount(x, k));
       }},
      {"label_field", str(c.label_field)},
      {"baseline_config", str(c.baseline_config)},
  };
  for (const auto& [key, value] : doc.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown config key '" + key + "'");
    }
    it->second(value, key);
  }
  return c;
}

json RunConfigParameters(const RunConfig& c) {
  return {{"seed", c.seed},
          {"k_novelty", c.k_novelty},
          {"B", c.B},
          {"alpha", c.alpha},
          {"novelty_group_field", c.novelty_group_field},
          {"code_field", c.code_field},
          {"coverage_stratify_field", c.coverage_stratify_field},
          {"orphan_before", c.orphan_before},
          {"pca_dims_similarity", c.pca_dims_similarity},
          {"overlap_quantile", c.overlap_quantile},
          {"pca_dims_density", c.pca_dims_density},
          {"gmm_K", c.gmm_K},
          {"gmm_max_iter", c.gmm_max_iter},
          {"gmm_tol", c.gmm_tol},
          {"density_q_low", c.density_q_low},
          {"density_q_high", c.density_q_high},
          {"graph_k", c.graph_k},
          {"k_b", c.k_b},
          {"boundary_alpha", c.boundary_alpha},
          {"k_top_holes", c.k_top_holes},
          {"holes_dims", c.holes_dims},
          {"holes_max_points", c.holes_max_points},
          {"holes_corrected", c.holes_corrected},
          {"probe_lambda", c.probe_lambda},
          {"probe_B", c.probe_B},
          {"eval_fraction", c.eval_fraction},
          {"held_out_datasets", c.held_out_datasets},
          {"retrieval_k", c.retrieval_k},
          {"label_field", c.label_field}};
}

void ValidateRunConfig(const RunConfig& c) {
  Positive(c.k_novelty, "k_novelty");
  Positive(c.B, "B");
  Positive(c.pca_dims_similarity, "pca_dims_similarity");
  Positive(c.pca_dims_density, "pca_dims_density");
  Positive(c.gmm_K, "gmm_K");
  Positive(c.gmm_max_iter, "gmm_max_iter");
  Positive(c.graph_k, "graph_k");
  Positive(c.k_b, "k_b");
  Positive(c.k_top_holes, "k_top_holes");
  Positive(c.probe_B, "probe_B");
  if (c.holes_max_points < 3) {
    throw Error(ErrorCode::kInvalidArgument, "holes_max_points must be >= 3");
  }
  if (c.workers < 1) {
    throw Error(ErrorCode::kInvalidArgument, "workers must be positive");
  }
  if (!(c.alpha > 0.0 && c.alpha < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 0.5)");
  }
  if (!(c.boundary_alpha > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "boundary_alpha must be positive");
  }
  if (!(c.overlap_quantile > 0.0 && c.overlap_quantile <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "overlap_quantile must lie in (0, 1]");
  }
  if (!(c.density_q_low > 0.0 && c.density_q_low < c.density_q_high &&
        c.density_q_high < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "density quantiles must satisfy 0 < q_low < q_high < 1");
  }
  if (!(c.gmm_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gmm_tol must be positive");
  }
  if (!(c.probe_lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "probe_lambda must be >= 0");
  }
  if (!(c.eval_fraction >= 0.0 && c.eval_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "eval_fraction must lie in [0, 1)");
  }
  if (c.retrieval_k.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "retrieval_k must not be empty");
  }
  for (std::size_t k : c.retrieval_k) Positive(k, "retrieval_k entries");
}

AuditContext LoadAuditContext(const RunConfig& config) {
  if (config.embeddings_path.empty() || config.metadata_path.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "embeddings_path and metadata_path are required");
  }
  AuditContext ctx{config,
                   LoadCorpus(config.embeddings_path, config.metadata_path),
                   FieldResolver()};
  if (!config.icd_blocks.empty()) {
    ctx.resolver = FieldResolver(IcdBlockTable::Load(config.icd_blocks));
  }
  return ctx;
}

ReportSection IngestSection(const AuditContext& ctx) {
  const auto& d = ctx.loaded.dedup;
  json removed = json::array();
  for (const auto& [id, row] : d.removed_ids) {
    removed.push_back({{"id", id}, {"row", row}});
  }
  ReportSection s;
  s.name = "ingest";
  s.json = {{"raw_count", ctx.loaded.raw_count},
            {"kept", d.kept},
            {"removed", d.removed},
            {"removed_ids", removed},
            {"summary", CorpusSummaryJson(ctx.corpus(), ctx.resolver)}};
  std::string csv = CsvRow({"dataset", "count"});
  for (const auto& ds : ctx.corpus().Datasets()) {
    csv += CsvRow({CsvField(ds),
                   std::to_string(ctx.corpus().RowsOfDataset(ds).size())});
  }
  s.csv = csv;
  return s;
}

ReportSection NoveltySection(const AuditContext& ctx) {
  const RunConfig& c = ctx.config;
  const Corpus& corpus = ctx.corpus();
  NoveltyOptions opts;
  opts.k = c.k_novelty;
  opts.draws = c.B;
  opts.alpha = c.alpha;
  opts.seed = c.seed;
  opts.workers = c.workers;
  const NoveltySeries series = ComputeNoveltySeries(corpus, opts);
  std::vector<std::string> warnings = series.warnings;

  json years = json::array();
  std::string csv =
      CsvRow({"year", "n", "nu", "baseline", "ci_low", "ci_high", "ratio"});
  for (const auto& y : series.years) {
    years.push_back({{"year", y.year},
                     {"n_new", y.n_new},
                     {"n_pool", y.n_pool},
                     {"nu_observed", y.nu_observed},
                     {"nu_baseline_mean", y.nu_baseline_mean},
                     {"ci_low", y.ci_low},
                     {"ci_high", y.ci_high},
                     {"ratio", OptionalNumber(y.ratio)},
                     {"observed_in_ci",
                      y.nu_observed >= y.ci_low && y.nu_observed <= y.ci_high}});
    csv += CsvRow({std::to_string(y.year), std::to_string(y.n_new),
                   CsvNumber(y.nu_observed), CsvNumber(y.nu_baseline_mean),
                   CsvNumber(y.ci_low), CsvNumber(y.ci_high),
                   y.ratio ? CsvNumber(*y.ratio) : ""});
  }

  json grouped = nullptr;
  const std::string group_field = NoveltyGroupField(ctx);
  ctx.resolver.Validate(group_field);
  if (FieldHasValues(ctx, group_field)) {
    json groups = json::array();
    for (const auto& g :
         GroupedNovelty(corpus, ctx.resolver, group_field, c.k_novelty,
                        c.workers)) {
      groups.push_back({{"group", g.group},
                        {"n_samples", g.n_samples},
                        {"n_datasets", g.n_datasets},
                        {"n_scored", g.n_scored},
                        {"mean_novelty", g.mean_novelty}});
    }
    grouped = {{"field", group_field}, {"groups", groups}};
  } else {
    warnings.push_back("group field '" + group_field + "' has no values");
  }

  json coverage = nullptr;
  json orphans = nullptr;
  ctx.resolver.Validate(c.code_field);
  if (FieldHasValues(ctx, c.code_field)) {
    json points = json::array();
    std::string stratify = c.coverage_stratify_field;
    if (!stratify.empty()) ctx.resolver.Validate(stratify);
    for (const auto& p :
         CumulativeCoverage(corpus, ctx.resolver, c.code_field, stratify)) {
      points.push_back({{"year", p.year},
                        {"stratum", p.stratum},
                        {"cumulative_fraction", p.cumulative_fraction},
                        {"codes_seen", p.codes_seen}});
    }
    coverage = {{"code_field", c.code_field},
                {"stratify_field", stratify},
                {"points", points}};

    int cutoff = c.orphan_before;
    if (cutoff == 0) {
      for (const auto& r : corpus.records()) {
        if (r.year) cutoff = std::max(cutoff, *r.year);
      }
    }
    if (cutoff != 0) {
      json labels = json::array();
      for (const auto& o :
           OrphanLabels(corpus, ctx.resolver, c.code_field, cutoff)) {
        labels.push_back({{"code", o.code},
                          {"description",
                           o.description ? json(*o.description) : json(nullptr)},
                          {"n_samples", o.n_samples},
                          {"first_year", o.first_year},
                          {"last_year", o.last_year}});
      }
      orphans = {{"code_field", c.code_field},
                 {"last_seen_before", cutoff},
                 {"labels", labels}};
    }
  } else {
    warnings.push_back("code field '" + c.code_field + "' has no values");
  }

  ReportSection s;
  s.name = "novelty";
  s.json = {{"parameters",
             {{"k", c.k_novelty}, {"B", c.B}, {"alpha", c.alpha},
              {"seed", c.seed}}},
            {"years", years},
            {"samples_without_year", series.samples_without_year},
            {"grouped", grouped},
            {"coverage", coverage},
            {"orphans", orphans},
            {"warnings", warnings}};
  s.csv = csv;
  return s;
}

ReportSection SimilaritySection(const AuditContext& ctx) {
  const RunConfig& c = ctx.config;
  const SimilarityMatrix sm =
      PairwiseFrechet(ctx.corpus(), c.pca_dims_similarity);
  json datasets = json::array();
  for (std::size_t i = 0; i < sm.datasets.size(); ++i) {
    datasets.push_back({{"name", sm.datasets[i]}, {"n", sm.counts[i]}});
  }
  json fd = json::array();
  std::string csv = CsvRow({"dataset_a", "dataset_b", "fd"});
  for (Eigen::Index i = 0; i < sm.fd.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < sm.fd.cols(); ++j) {
      row.push_back(sm.fd(i, j));
      if (j > i) {
        csv += CsvRow({CsvField(sm.datasets[static_cast<std::size_t>(i)]),
                       CsvField(sm.datasets[static_cast<std::size_t>(j)]),
                       CsvNumber(sm.fd(i, j))});
      }
    }
    fd.push_back(row);
  }
  json uniqueness = json::array();
  for (const auto& u : UniquenessScores(sm)) {
    uniqueness.push_back({{"dataset", u.dataset}, {"score", u.score}});
  }
  json pairs = json::array();
  for (const auto& p :
       HighOverlapPairs(sm, OverlapThreshold::AtQuantile(c.overlap_quantile))) {
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"fd", p.fd}});
  }
  ReportSection s;
  s.name = "similarity";
  s.json = {{"space", sm.space},
            {"dims", sm.dims},
            {"ridge", kCovarianceRidge},
            {"datasets", datasets},
            {"fd", fd},
            {"uniqueness", uniqueness},
            {"overlap", {{"quantile", c.overlap_quantile}, {"pairs", pairs}}},
            {"max_clamped", sm.max_clamped},
            {"warnings", sm.warnings}};
  s.csv = csv;
  return s;
}

ReportSection DensitySection(const AuditContext& ctx) {
  const RunConfig& c = ctx.config;
  const Corpus& corpus = ctx.corpus();
  std::vector<std::string> notes;
  std::size_t dims = std::min({c.pca_dims_density, corpus.size(), corpus.dim()});
  if (dims != c.pca_dims_density) {
    notes.push_back("pca_dims_density clamped to " + std::to_string(dims));
  }
  const ReducedMatrix reduced = PcaReduce(corpus.embeddings(), dims);
  GmmOptions go;
  go.components = c.gmm_K;
  go.seed = c.seed;
  go.tol = c.gmm_tol;
  go.max_iter = c.gmm_max_iter;
  go.workers = c.workers;
  const GmmModel model = FitGmm(reduced.values, go);
  const auto scores = LogDensity(model, reduced.values);
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& r : corpus.records()) ids.push_back(r.id);
  const DensityReport rep =
      DensityExtremes(scores, ids, c.density_q_low, c.density_q_high);

  std::map<std::string, std::array<std::size_t, 3>> by_dataset;
  for (const auto& r : corpus.records()) ++by_dataset[r.dataset][0];
  const auto flagged = [&](const std::vector<std::size_t>& rows, int slot) {
    json out = json::array();
    for (std::size_t r : rows) {
      ++by_dataset[corpus.record(r).dataset][static_cast<std::size_t>(slot)];
      out.push_back({{"id", corpus.record(r).id},
                     {"dataset", corpus.record(r).dataset},
                     {"log_density", rep.log_density[r]}});
    }
    return out;
  };
  const json sparse = flagged(rep.sparse_rows, 1);
  const json dense = flagged(rep.dense_rows, 2);
  json per_dataset = json::object();
  for (const auto& [ds, n] : by_dataset) {
    per_dataset[ds] = {{"n", n[0]}, {"sparse", n[1]}, {"dense", n[2]}};
  }
  std::vector<int> flag(corpus.size(), 0);
  for (std::size_t r : rep.sparse_rows) flag[r] = -1;
  for (std::size_t r : rep.dense_rows) flag[r] = 1;
  std::string csv = CsvRow({"id", "dataset", "log_density", "flag"});
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    csv += CsvRow({CsvField(corpus.record(r).id),
                   CsvField(corpus.record(r).dataset),
                   CsvNumber(rep.log_density[r]),
                   flag[r] < 0 ? "sparse" : flag[r] > 0 ? "dense" : ""});
  }
  ReportSection s;
  s.name = "density";
  s.json = {{"space", "pca"},
            {"dims", dims},
            {"explained_variance_fraction",
             reduced.total_variance > 0
                 ? reduced.explained_variance.sum() / reduced.total_variance
                 : 0.0},
            {"model",
             {{"components", model.components()},
              {"ridge", model.ridge},
              {"converged", model.converged},
              {"iterations", model.iterations},
              {"final_log_likelihood", model.final_log_likelihood},
              {"objective_trace", model.objective_trace},
              {"weights", std::vector<double>(model.weights.data(),
                                              model.weights.data() +
                                                  model.weights.size())}}},
            {"n", corpus.size()},
            {"q_low", rep.q_low},
            {"q_high", rep.q_high},
            {"low_threshold", rep.low_threshold},
            {"high_threshold", rep.high_threshold},
            {"sparse", sparse},
            {"dense", dense},
            {"by_dataset", per_dataset},
            {"notes", notes}};
  s.csv = csv;
  return s;
}

ReportSection HolesSection(const AuditContext& ctx) {
  const RunConfig& c = ctx.config;
  const Corpus& corpus = ctx.corpus();
  Eigen::MatrixXd points;
  std::string space = "full";
  if (c.holes_dims > 0 && c.holes_dims < corpus.dim()) {
    const std::size_t dims = std::min(c.holes_dims, corpus.size());
    points = PcaReduce(corpus.embeddings(), dims).values;
    space = "pca";
  } else {
    points = corpus.embeddings().ToDouble();
  }
  HoleOptions ho;
  ho.graph_k = c.graph_k;
  ho.corrected = c.holes_corrected;
  ho.k_top = c.k_top_holes;
  ho.k_b = c.k_b;
  ho.alpha = c.boundary_alpha;
  ho.max_points = c.holes_max_points;
  ho.seed = c.seed;
  const HoleAnalysis a = DetectHoles(points, ho);

  std::vector<std::size_t> order(a.pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
    return a.pairs[x].persistence() > a.pairs[y].persistence();
  });
  json pairs = json::array();
  for (std::size_t i : order) {
    pairs.push_back({{"birth", a.pairs[i].birth},
                     {"death", FiniteOrNull(a.pairs[i].death)},
                     {"persistence", FiniteOrNull(a.pairs[i].persistence())}});
  }
  json holes = json::array();
  std::string csv = CsvRow({"rank", "birth", "death", "persistence", "size",
                            "radius", "log_volume", "n_boundary"});
  for (const auto& h : a.holes) {
    json vertex_ids = json::array();
    std::map<std::string, std::size_t> datasets;
    for (std::size_t v : h.vertices) {
      vertex_ids.push_back(corpus.record(v).id);
      ++datasets[corpus.record(v).dataset];
    }
    json boundary_ids = json::array();
    for (std::size_t v : h.boundary_rows) {
      boundary_ids.push_back(corpus.record(v).id);
    }
    json words = json::array();
    const auto freq = LabelWordFrequencies(corpus, h.boundary_rows);
    for (std::size_t i = 0; i < freq.size() && i < 15; ++i) {
      words.push_back({{"word", freq[i].word}, {"count", freq[i].count}});
    }
    holes.push_back(
        {{"rank", h.rank},
         {"component", h.component},
         {"birth", h.birth},
         {"death", FiniteOrNull(h.death)},
         {"persistence", FiniteOrNull(h.persistence)},
         {"size", h.size},
         {"radius", h.radius},
         {"volume_dim", h.volume_dim},
         {"volume", FiniteOrNull(h.volume)},
         {"log_volume", FiniteOrNull(h.log_volume)},
         {"center", std::vector<double>(h.center.data(),
                                        h.center.data() + h.center.size())},
         {"vertex_ids", vertex_ids},
         {"boundary_ids", boundary_ids},
         {"n_boundary", h.boundary_rows.size()},
         {"datasets", datasets},
         {"top_words", words}});
    csv += CsvRow({std::to_string(h.rank), CsvNumber(h.birth),
                   CsvNumber(h.death), CsvNumber(h.persistence),
                   std::to_string(h.size), CsvNumber(h.radius),
                   CsvNumber(h.log_volume),
                   std::to_string(h.boundary_rows.size())});
  }
  ReportSection s;
  s.name = "holes";
  s.json = {{"parameters",
             {{"graph_k", c.graph_k},
              {"k_b", c.k_b},
              {"boundary_alpha", c.boundary_alpha},
              {"k_top_holes", c.k_top_holes},
              {"max_points", c.holes_max_points},
              {"corrected", c.holes_corrected},
              {"seed", c.seed}}},
            {"space", space},
            {"dims", a.dim},
            {"n_points", a.n_points},
            {"n_used", a.n_used},
            {"subsampled", a.subsampled},
            {"n_components", a.n_components},
            {"clamped_negative", a.clamped_negative},
            {"pairs", pairs},
            {"holes", holes},
            {"notes", a.notes}};
  s.csv = csv;
  return s;
}

ProbeOutputs ProbesSection(const AuditContext& ctx) {
  const RunConfig& c = ctx.config;
  const Corpus& corpus = ctx.corpus();
  std::vector<ProbeFieldSpec> specs = DefaultProbeFields();
  for (auto& s : specs) s.lambda = c.probe_lambda;
  ProbeProtocolOptions po;
  po.eval_fraction = c.eval_fraction;
  po.held_out_datasets = c.held_out_datasets;
  po.draws = c.probe_B;
  po.alpha = c.alpha;
  po.seed = c.seed;
  po.workers = c.workers;
  const ProbeSuite suite = RunProbeSuite(corpus, specs, po);
  ProbeOutputs out;
  out.imputation = ImputeMissing(corpus, suite.models);

  json fields = json::array();
  std::string csv =
      CsvRow({"field", "split", "metric", "point", "ci_low", "ci_high", "n"});
  for (const auto& f : suite.fields) {
    json evals = json::array();
    for (const auto& e : f.evaluations) {
      json ev = ProbeReportJson(e.report);
      ev["split"] = e.split;
      ev["train_overlap"] = e.train_overlap;
      ev["grouped"] = e.grouped ? ProbeReportJson(*e.grouped) : json(nullptr);
      evals.push_back(ev);
      const auto row = [&](const ProbeReport& r, const std::string& metric) {
        csv += CsvRow({f.spec.field, CsvField(e.split), metric,
                       CsvNumber(r.point), CsvNumber(r.ci_low),
                       CsvNumber(r.ci_high), std::to_string(r.n)});
      };
      row(e.report, e.report.metric_name);
      if (e.grouped) row(*e.grouped, "grouped_" + e.grouped->metric_name);
    }
    fields.push_back({{"field", f.spec.field},
                      {"kind", ProbeKindName(f.spec.kind)},
                      {"lambda", f.spec.lambda},
                      {"n_labeled", f.n_labeled},
                      {"n_train", f.n_train},
                      {"classes", f.classes},
                      {"iterations", f.iterations},
                      {"gradient_norm", f.gradient_norm},
                      {"converged", f.converged},
                      {"skipped", f.skipped},
                      {"warning", f.warning},
                      {"evaluations", evals}});
  }
  json coverage = json::array();
  for (const auto& cv : out.imputation.coverage) {
    coverage.push_back({{"field", cv.field},
                        {"total", cv.total},
                        {"before", cv.before},
                        {"after", cv.after},
                        {"before_pct", cv.before_pct},
                        {"after_pct", cv.after_pct},
                        {"delta_pp", cv.delta_pp}});
  }
  std::string jsonl;
  for (std::size_t r = 0; r < out.imputation.records.size(); ++r) {
    jsonl += ImputedRecordJson(out.imputation.records[r],
                               out.imputation.provenance[r])
                 .dump() +
             "\n";
  }
  out.section.name = "probes";
  out.section.json = {{"parameters",
                       {{"lambda", c.probe_lambda},
                        {"B", c.probe_B},
                        {"alpha", c.alpha},
                        {"eval_fraction", c.eval_fraction},
                        {"held_out_datasets", c.held_out_datasets},
                        {"seed", c.seed}}},
                      {"fields", fields},
                      {"coverage", coverage},
                      {"mean_delta_pp", out.imputation.mean_delta_pp},
                      {"imputed_values", out.imputation.imputed},
                      {"warnings", suite.warnings}};
  out.section.csv = csv;
  out.section.attachments.emplace_back("imputed.jsonl", std::move(jsonl));
  return out;
}

ReportSection RetrievalSection(const AuditContext& ctx) {
  const RunConfig& c = ctx.config;
  RetrievalEvalOptions ro;
  ro.label_field = c.label_field;
  ro.ks = c.retrieval_k;
  ro.workers = c.workers;
  const RetrievalAudit audit = AuditRetrieval(ctx.corpus(), ctx.resolver, ro);
  json rows = json::array();
  std::string csv = CsvRow({"dataset", "mode", "k", "precision", "recall",
                            "recall_capped", "ap", "n_queries",
                            "n_no_relevant"});
  for (const auto& r : audit.rows) {
    rows.push_back({{"dataset", r.dataset},
                    {"mode", RetrievalModeName(r.mode)},
                    {"k", r.k},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"recall_capped", r.recall_capped},
                    {"ap", r.ap},
                    {"n_queries", r.n_queries},
                    {"n_no_relevant", r.n_no_relevant}});
    csv += CsvRow({CsvField(r.dataset), std::string(RetrievalModeName(r.mode)),
                   std::to_string(r.k), CsvNumber(r.precision),
                   CsvNumber(r.recall), CsvNumber(r.recall_capped),
                   CsvNumber(r.ap), std::to_string(r.n_queries),
                   std::to_string(r.n_no_relevant)});
  }
  ReportSection s;
  s.name = "retrieval";
  s.json = {{"label_field", c.label_field},
            {"ks", c.retrieval_k},
            {"rows", rows},
            {"skipped_datasets", audit.skipped_datasets}};
  s.csv = csv;
  return s;
}

ReportSection DivergenceSection(const AuditContext& ctx,
                                const Imputation* imputation) {
  ReportSection s;
  s.name = "divergence";
  if (ctx.config.baseline_config.empty()) return s;
  const auto baselines = LoadBaselines(ctx.config.baseline_config);
  std::vector<std::string> warnings;
  std::string csv = CsvRow({"records", "field", "bin", "count", "corpus_pct",
                            "baseline_pct", "delta_pp"});
  const auto tables = [&](std::span<const MetadataRecord> records,
                          const std::string& source) {
    json out = json::array();
    for (const auto& b : baselines) {
      DivergenceTable t;
      try {
        t = CompareToBaseline(records, ctx.resolver, b);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInvalidInput) throw;
        warnings.push_back(source + ": " + e.what());
        continue;
      }
      out.push_back(DivergenceJson(t));
      for (const auto& r : t.rows) {
        csv += CsvRow({source, CsvField(t.field), CsvField(r.bin),
                       std::to_string(r.count),
                       CsvPercent(100.0 * r.corpus_fraction),
                       CsvPercent(100.0 * r.baseline_fraction),
                       CsvPercent(r.delta_pp)});
      }
    }
    return out;
  };
  json doc = {{"original", tables(ctx.corpus().records(), "original")}};
  doc["imputed"] = imputation ? tables(imputation->records, "imputed")
                              : json(nullptr);
  doc["warnings"] = warnings;
  s.json = std::move(doc);
  s.csv = csv;
  return s;
}

ManifestInfo MakeManifestInfo(const AuditContext& ctx,
                              std::string_view command) {
  ManifestInfo info;
  info.tool_version = std::string(kVersion);
  info.command = std::string(command);
  info.seed = ctx.config.seed;
  info.parameters = RunConfigParameters(ctx.config);
  info.inputs.push_back(DigestInput("embeddings", ctx.config.embeddings_path));
  info.inputs.push_back(DigestInput("metadata", ctx.config.metadata_path));
  if (!ctx.config.icd_blocks.empty()) {
    info.inputs.push_back(DigestInput("icd_blocks", ctx.config.icd_blocks));
  }
  if (!ctx.config.baseline_config.empty()) {
    info.inputs.push_back(
        DigestInput("baseline_config", ctx.config.baseline_config));
  }
  return info;
}

}  // namespace atlas
