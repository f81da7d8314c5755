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


#include "cli.h"

#include <CLI11.hpp>
#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "atlas/audit.h"
#include "atlas/errors.h"
#include "atlas/report.h"
#include "atlas/retrieval.h"
#include "atlas/service.h"
#include "atlas/version.h"

namespace atlas::cli {
namespace {

using nlohmann::json;

inline constexpr const char* kOutDirEnv = "ATLAS_OUT_DIR";

// Flags bound to a scratch RunConfig; only flags actually given are copied
// over the config-file values.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App& app) : app_(app) {}

  template <typename T>
  CLI::Option* Add(const std::string& name, T RunConfig::*member,
                   const std::string& help) {
    CLI::Option* opt = app_.add_option("--" + name, flags_.*member, help);
    overrides_.emplace_back(opt, [this, member](RunConfig& dst) {
      dst.*member = flags_.*member;
    });
    return opt;
  }

  void Apply(RunConfig& dst) const {
    for (const auto& [opt, copy] : overrides_) {
      if (opt->count() > 0) copy(dst);
    }
  }

 private:
  CLI::App& app_;
  RunConfig flags_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>>
      overrides_;
};

void AddConfigFlags(ConfigFlags& f) {
  f.Add("embeddings_path", &RunConfig::embeddings_path,
        "binary embedding file");
  f.Add("metadata_path", &RunConfig::metadata_path, "metadata JSON Lines");
  f.Add("out_dir", &RunConfig::out_dir,
        std::string("report directory (default $") + kOutDirEnv + ")");
  f.Add("seed", &RunConfig::seed, "root random seed");
  f.Add("workers", &RunConfig::workers, "worker threads");
  f.Add("k_novelty", &RunConfig::k_novelty, "neighbours per novelty score");
  f.Add("B", &RunConfig::B, "novelty bootstrap draws");
  f.Add("alpha", &RunConfig::alpha, "two-sided CI level");
  f.Add("novelty_group_field", &RunConfig::novelty_group_field,
        "grouping field for per-group novelty");
  f.Add("code_field", &RunConfig::code_field, "diagnostic code field");
  f.Add("coverage_stratify_field", &RunConfig::coverage_stratify_field,
        "stratum field for cumulative coverage");
  f.Add("orphan_before", &RunConfig::orphan_before,
        "orphan cutoff year (0: latest year)");
  f.Add("icd_blocks", &RunConfig::icd_blocks, "ICD block table (JSON)");
  f.Add("pca_dims_similarity", &RunConfig::pca_dims_similarity,
        "PCA dims for dataset similarity");
  f.Add("overlap_quantile", &RunConfig::overlap_quantile,
        "FD quantile marking high-overlap pairs");
  f.Add("pca_dims_density", &RunConfig::pca_dims_density,
        "PCA dims for the density model");
  f.Add("gmm_K", &RunConfig::gmm_K, "mixture components");
  f.Add("gmm_max_iter", &RunConfig::gmm_max_iter, "EM iteration cap");
  f.Add("gmm_tol", &RunConfig::gmm_tol, "EM convergence tolerance");
  f.Add("density_q_low", &RunConfig::density_q_low, "sparse quantile");
  f.Add("density_q_high", &RunConfig::density_q_high, "dense quantile");
  f.Add("graph_k", &RunConfig::graph_k, "kNN graph degree for holes");
  f.Add("k_b", &RunConfig::k_b, "neighbour rank for the boundary radius");
  f.Add("boundary_alpha", &RunConfig::boundary_alpha,
        "boundary radius scale");
  f.Add("k_top_holes", &RunConfig::k_top_holes, "holes to report");
  f.Add("holes_dims", &RunConfig::holes_dims,
        "PCA dims for holes (0: full space)");
  f.Add("holes_max_points", &RunConfig::holes_max_points,
        "subsample cap for holes");
  f.Add("holes_corrected", &RunConfig::holes_corrected,
        "use the degree-corrected resistance");
  f.Add("probe_lambda", &RunConfig::probe_lambda, "probe L2 strength");
  f.Add("probe_B", &RunConfig::probe_B, "probe bootstrap draws");
  f.Add("eval_fraction", &RunConfig::eval_fraction,
        "held-out fraction of labeled samples");
  f.Add("held_out_datasets", &RunConfig::held_out_datasets,
        "datasets evaluated out of distribution")
      ->delimiter(',');
  f.Add("retrieval_k", &RunConfig::retrieval_k, "cutoffs, e.g. 1,5,10")
      ->delimiter(',');
  f.Add("label_field", &RunConfig::label_field, "retrieval relevance field");
  f.Add("baseline_config", &RunConfig::baseline_config,
        "population baselines (JSON)");
}

json ErrorJson(std::string_view code, const std::string& message,
               int exit_code) {
  return {{"error",
           {{"code", code}, {"message", message}, {"exit_code", exit_code}}}};
}

int ExitCodeOf(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kNotFound:
    case ErrorCode::kEmptyPool:
    case ErrorCode::kIo:
      return kExitInput;
    case ErrorCode::kComputation:
      break;
  }
  return kExitComputation;
}

RunConfig ResolveConfig(const std::string& config_path,
                        const ConfigFlags& flags) {
  RunConfig c;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) {
    c.out_dir = env;
  }
  if (!config_path.empty()) {
    json doc;
    try {
      doc = json::parse(ReadTextFile(config_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config file is not valid JSON: " + std::string(e.what()));
    }
    c = RunConfigFromJson(doc, c);
  }
  flags.Apply(c);
  ValidateRunConfig(c);
  return c;
}

void RequireOutDir(const RunConfig& c) {
  if (c.out_dir.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("--out_dir is required (or set ") + kOutDirEnv +
                    ")");
  }
}

int Emit(const AuditContext& ctx, std::string_view command,
         const std::vector<ReportSection>& sections, std::ostream& out) {
  const json manifest =
      EmitReport(sections, MakeManifestInfo(ctx, command), ctx.config.out_dir);
  for (const auto& [name, _] : manifest["files"].items()) {
    out << name << "\n";
  }
  return kExitOk;
}

int RunSections(const std::string& command, const RunConfig& config,
                std::ostream& out) {
  RequireOutDir(config);
  const AuditContext ctx = LoadAuditContext(config);
  std::vector<ReportSection> sections;
  const auto probes_and_divergence = [&] {
    ProbeOutputs p = ProbesSection(ctx);
    sections.push_back(std::move(p.section));
    sections.push_back(DivergenceSection(ctx, &p.imputation));
  };
  if (command == "ingest") {
    sections.push_back(IngestSection(ctx));
  } else if (command == "novelty") {
    sections.push_back(NoveltySection(ctx));
  } else if (command == "similarity") {
    sections.push_back(SimilaritySection(ctx));
  } else if (command == "density") {
    sections.push_back(DensitySection(ctx));
  } else if (command == "holes") {
    sections.push_back(HolesSection(ctx));
  } else if (command == "impute") {
    probes_and_divergence();
  } else if (command == "retrieve-eval") {
    sections.push_back(RetrievalSection(ctx));
  } else if (command == "audit-all") {
    sections.push_back(IngestSection(ctx));
    sections.push_back(NoveltySection(ctx));
    sections.push_back(SimilaritySection(ctx));
    sections.push_back(DensitySection(ctx));
    sections.push_back(HolesSection(ctx));
    probes_and_divergence();
    sections.push_back(RetrievalSection(ctx));
  }
  return Emit(ctx, command, sections, out);
}

struct SearchArgs {
  std::string sample_id;
  std::vector<double> vector;
  std::size_t k = 10;
  std::vector<std::string> filters;  // field=v1,v2
  std::string pool;
  std::vector<std::string> pool_ids;
};

RetrievalQuery BuildQuery(const SearchArgs& a) {
  json body = json::object();
  if (!a.sample_id.empty()) body["sample_id"] = a.sample_id;
  if (!a.vector.empty()) body["vector"] = a.vector;
  body["k"] = a.k;
  if (!a.filters.empty()) {
    json filters = json::object();
    for (const auto& f : a.filters) {
      const std::size_t eq = f.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "--filter expects field=value[,value...], got '" + f + "'");
      }
      json& values = filters[f.substr(0, eq)];
      if (values.is_null()) values = json::array();
      std::string rest = f.substr(eq + 1);
      std::size_t start = 0;
      while (start <= rest.size()) {
        std::size_t comma = rest.find(',', start);
        if (comma == std::string::npos) comma = rest.size();
        values.push_back(rest.substr(start, comma - start));
        start = comma + 1;
      }
    }
    body["filters"] = filters;
  }
  if (!a.pool.empty() && !a.pool_ids.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "--pool and --pool_ids are mutually exclusive");
  }
  if (!a.pool.empty()) body["pool"] = a.pool;
  if (!a.pool_ids.empty()) body["pool"] = a.pool_ids;
  return QueryFromJson(body);
}

int RunSearch(const RunConfig& config, const SearchArgs& args,
              std::ostream& out) {
  const RetrievalQuery query = BuildQuery(args);
  const AuditContext ctx = LoadAuditContext(config);
  const auto hits = Search(ctx.corpus(), ctx.resolver, query);
  out << CanonicalJson(
      {{"k", query.k}, {"results", SearchResultJson(ctx.corpus(), hits)}});
  return kExitOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string reports_dir;
};

int RunServe(const RunConfig& config, const ServeArgs& args,
             std::ostream& out, std::ostream& err) {
  AuditContext ctx = LoadAuditContext(config);
  const std::string reports =
      args.reports_dir.empty() ? config.out_dir : args.reports_dir;
  auto index = std::make_shared<const AtlasIndex>(BuildAtlasIndex(
      std::move(ctx.loaded.corpus), std::move(ctx.resolver), reports));
  AtlasService service(index);

  // SIGINT/SIGTERM are blocked here and consumed by a waiter thread, which
  // stops the server; threads spawned later inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.Stop();
  });
  const bool ok = service.Listen(args.host, args.port, [&](int port) {
    out << CanonicalJson({{"listening", {{"host", args.host}, {"port", port}}},
                          {"n_samples", index->corpus.size()},
                          {"reports", [&] {
                             json names = json::array();
                             for (const auto& [n, _] : index->reports) {
                               names.push_back(n);
                             }
                             return names;
                           }()}});
    out.flush();
  });
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  if (!ok) {
    err << CanonicalJson(ErrorJson(
        ErrorCodeName(ErrorCode::kIo),
        "cannot bind " + args.host + ":" + std::to_string(args.port),
        kExitInput));
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app("Audit an embedding corpus: novelty, similarity, density, "
               "holes, probes and retrieval.",
               "atlas");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  ConfigFlags flags(app);
  AddConfigFlags(flags);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON run config; explicit flags override it");

  const std::vector<std::pair<std::string, std::string>> report_commands = {
      {"ingest", "load, deduplicate and summarize the corpus"},
      {"novelty", "yearly novelty with bootstrap baseline"},
      {"similarity", "pairwise dataset Frechet distances"},
      {"density", "GMM log-density extremes"},
      {"holes", "persistent H1 holes in resistance space"},
      {"impute", "linear probes, imputation and baseline divergence"},
      {"retrieve-eval", "same-dataset vs atlas retrieval metrics"},
      {"audit-all", "every section"},
  };
  for (const auto& [name, help] : report_commands) app.add_subcommand(name, help);

  SearchArgs search_args;
  CLI::App* search = app.add_subcommand("search", "nearest-neighbour query");
  search->add_option("--sample_id", search_args.sample_id, "query sample id");
  search->add_option("--vector", search_args.vector, "query vector")
      ->delimiter(',');
  search->add_option("--k", search_args.k, "results to return");
  search->add_option("--filter", search_args.filters,
                     "field=value[,value...]; repeatable");
  search->add_option("--pool", search_args.pool, "restrict to a dataset");
  search->add_option("--pool_ids", search_args.pool_ids,
                     "restrict to these ids")
      ->delimiter(',');

  ServeArgs serve_args;
  CLI::App* serve = app.add_subcommand("serve", "HTTP query service");
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "port (0: any free port)");
  serve->add_option("--reports_dir", serve_args.reports_dir,
                    "directory of cached reports (default: out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << CanonicalJson(ErrorJson("usage", e.what(), kExitUsage));
    return kExitUsage;
  }

  try {
    const RunConfig config = ResolveConfig(config_path, flags);
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "search") return RunSearch(config, search_args, out);
    if (command == "serve") return RunServe(config, serve_args, out, err);
    return RunSections(command, config, out);
  } catch (const LoadError& e) {
    json doc = ErrorJson(ErrorCodeName(e.code()), e.what(), ExitCodeOf(e.code()));
    doc["error"]["kind"] = LoadErrorKindName(e.kind());
    err << CanonicalJson(doc);
    return ExitCodeOf(e.code());
  } catch (const Error& e) {
    err << CanonicalJson(
        ErrorJson(ErrorCodeName(e.code()), e.what(), ExitCodeOf(e.code())));
    return ExitCodeOf(e.code());
  } catch (const std::exception& e) {
    err << CanonicalJson(ErrorJson("internal", e.what(), kExitComputation));
    return kExitComputation;
  }
}

}  // namespace atlas::cli
