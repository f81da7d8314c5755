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

#ifndef ATLAS_PROBES_H_
#define ATLAS_PROBES_H_

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/corpus.h"

namespace atlas {

enum class ProbeKind { kClassifier, kRegressor };

std::string_view ProbeKindName(ProbeKind kind);

// Linear predictor over feature rows. `weights` has one row per feature plus
// a final bias row; one column per class (classifier) or a single column.
struct ProbeModel {
  std::string target_field;
  ProbeKind kind = ProbeKind::kClassifier;
  std::vector<std::string> classes;  // sorted; classifier only
  Eigen::MatrixXd weights;
  double lambda = 1.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = true;

  std::size_t features() const {
    return static_cast<std::size_t>(weights.rows()) - 1;
  }

  // Rows of [X, 1] * weights.
  Eigen::MatrixXd Scores(const Eigen::MatrixXd& x) const;
  // Highest-scoring class; ties go to the earlier class.
  std::vector<std::string> PredictLabels(const Eigen::MatrixXd& x) const;
  std::vector<double> PredictValues(const Eigen::MatrixXd& x) const;
};

// sum_i -log softmax(z_i)[y_i] + (lambda / 2) * ||W without bias row||^2,
// z = [X, 1] W. Writes the gradient when `grad` is non-null.
double SoftmaxObjective(const Eigen::MatrixXd& weights,
                        const Eigen::MatrixXd& x, std::span<const int> y,
                        double lambda, Eigen::MatrixXd* grad = nullptr);

struct ClassifierOptions {
  double lambda = 1.0;
  double tol = 1e-6;
  int max_iter = 1000;
};

// Multinomial logistic probe from zero initialization. Throws on fewer than
// two classes or non-finite features.
ProbeModel TrainClassifierProbe(const Eigen::MatrixXd& x,
                                std::span<const std::string> y,
                                const ClassifierOptions& options = {});

// Ridge regression with an unpenalized bias, solved in centered form.
// lambda = 0 with a singular Gram matrix throws, advising lambda > 0.
ProbeModel TrainRegressorProbe(const Eigen::MatrixXd& x,
                               std::span<const double> y, double lambda = 1.0);

struct ClassScore {
  std::string label;
  std::size_t support = 0;  // true count
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-class scores over every label seen in truth or prediction.
std::vector<ClassScore> PerClassScores(std::span<const std::string> truth,
                                       std::span<const std::string> pred);

// Unweighted mean of per-class F1; labels absent from both sides do not
// participate. Throws on empty or misaligned input.
double MacroF1(std::span<const std::string> truth,
               std::span<const std::string> pred);

// 1 - SS_res / SS_tot. With SS_tot = 0 the score is 1 for an exact fit and 0
// otherwise.
double RSquared(std::span<const double> truth, std::span<const double> pred);

struct ProbeReport {
  std::string metric_name;  // "macro_f1" or "r2"
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
  std::size_t draws = 0;
  std::vector<ClassScore> per_class;
};

// Percentile interval over `draws` resamples of the n evaluation pairs; the
// statistic sees the resampled row positions.
std::pair<double, double> BootstrapInterval(
    std::size_t n, std::size_t draws, double alpha, std::uint64_t seed,
    const std::function<double(std::span<const std::size_t>)>& statistic);

ProbeReport BootstrapMacroF1(std::span<const std::string> truth,
                             std::span<const std::string> pred,
                             std::size_t draws = 1000, double alpha = 0.05,
                             std::uint64_t seed = 42);

ProbeReport BootstrapRSquared(std::span<const double> truth,
                              std::span<const double> pred,
                              std::size_t draws = 1000, double alpha = 0.05,
                              std::uint64_t seed = 42);

// Metric of the model on (x, truth). Throws when the metric does not fit the
// model kind or the set is empty.
double EvaluateClassifier(const ProbeModel& model, const Eigen::MatrixXd& x,
                          std::span<const std::string> truth);
double EvaluateRegressor(const ProbeModel& model, const Eigen::MatrixXd& x,
                         std::span<const double> truth);

struct ProbeFieldSpec {
  std::string field;
  ProbeKind kind = ProbeKind::kClassifier;
  double lambda = 1.0;
};

// origin, fst, age, gender, body_region.
std::vector<ProbeFieldSpec> DefaultProbeFields();

// Target value of an imputable field as a class label, or the age as a real.
std::optional<std::string> ProbeLabel(const MetadataRecord& r,
                                      std::string_view field);
std::optional<double> ProbeTarget(const MetadataRecord& r,
                                  std::string_view field);

struct ProbeProtocolOptions {
  double eval_fraction = 0.2;
  // Datasets never used for training; each becomes its own evaluation split.
  std::vector<std::string> held_out_datasets;
  std::size_t draws = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  double tol = 1e-6;
  int max_iter = 1000;
  int workers = 1;
};

struct ProbeEvaluation {
  std::string split;  // "internal" or a held-out dataset name
  ProbeReport report;
  // fst scored on I-II / III-IV / V-VI; age scored on its reporting bins.
  std::optional<ProbeReport> grouped;
  std::size_t train_overlap = 0;  // |train ids ∩ eval ids|, always 0
  std::vector<std::size_t> rows;  // evaluated corpus rows, ascending
};

struct FieldProbeResult {
  ProbeFieldSpec spec;
  std::size_t n_labeled = 0;  // outside held-out datasets
  std::size_t n_train = 0;
  std::vector<std::size_t> train_rows;  // ascending
  std::vector<std::string> classes;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = true;
  std::vector<ProbeEvaluation> evaluations;
  bool skipped = false;
  std::string warning;
};

struct ProbeSuite {
  std::vector<FieldProbeResult> fields;
  // Per field, refit on every labeled row outside the held-out datasets;
  // these drive imputation.
  std::vector<ProbeModel> models;
  std::vector<std::string> warnings;
};

// Per field: seeded train / internal-eval split of the labeled rows outside
// the held-out datasets, plus one evaluation per held-out dataset. Throws if
// a training id ever appears in an evaluation split.
ProbeSuite RunProbeSuite(const Corpus& corpus,
                         std::span<const ProbeFieldSpec> specs,
                         const ProbeProtocolOptions& options);

enum class Provenance { kOriginal, kImputed };

std::string_view ProvenanceName(Provenance p);

struct FieldCoverage {
  std::string field;
  std::size_t total = 0;
  std::size_t before = 0;
  std::size_t after = 0;
  double before_pct = 0.0;
  double after_pct = 0.0;
  double delta_pp = 0.0;
};

struct Imputation {
  std::vector<MetadataRecord> records;
  // Per record: provenance of each imputable field that has a value.
  std::vector<std::map<std::string, Provenance>> provenance;
  std::vector<FieldCoverage> coverage;
  double mean_delta_pp = 0.0;
  std::size_t imputed = 0;
  std::vector<std::string> warnings;
};

// Fills absent fields from the models; present values are never touched.
// Imputed ages are clamped to be non-negative.
Imputation ImputeMissing(const Corpus& corpus,
                         std::span<const ProbeModel> models);

// Record JSON plus a "provenance" object.
nlohmann::json ImputedRecordJson(const MetadataRecord& record,
                                 const std::map<std::string, Provenance>& p);

}  // namespace atlas

#endif  // ATLAS_PROBES_H_
