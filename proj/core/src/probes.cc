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

#include "atlas/probes.h"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "atlas/errors.h"
#include "atlas/fields.h"
#include "atlas/lbfgs.h"
#include "atlas/parallel.h"
#include "atlas/rng.h"
#include "atlas/stats.h"

namespace atlas {
namespace {

void CheckFinite(const Eigen::MatrixXd& x) {
  if (!x.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "probe features must be finite");
  }
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::MatrixXd SelectRows(const Eigen::MatrixXd& x,
                           std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void SetField(MetadataRecord& r, std::string_view field,
              const std::string& label) {
  if (field == "fst") {
    r.fst = std::stoi(label);
  } else if (field == "gender") {
    r.gender = label;
  } else if (field == "origin") {
    r.origin = label;
  } else if (field == "body_region") {
    r.body_region = label;
  } else if (field == "modality") {
    r.modality = label;
  } else if (field == "label") {
    r.label = label;
  } else if (field == "icd") {
    r.icd = label;
  } else {
    throw Error(ErrorCode::kNotFound,
                "field '" + std::string(field) + "' cannot be imputed");
  }
}

std::string GroupLabel(std::string_view field, const std::string& label) {
  if (field == "fst") return FstGroup(std::stoi(label));
  return label;
}

}  // namespace

std::string_view ProbeKindName(ProbeKind kind) {
  return kind == ProbeKind::kClassifier ? "classifier" : "regressor";
}

std::string_view ProvenanceName(Provenance p) {
  return p == Provenance::kOriginal ? "original" : "imputed";
}

Eigen::MatrixXd ProbeModel::Scores(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != features()) {
    throw Error(ErrorCode::kInvalidArgument,
                "probe expects " + std::to_string(features()) +
                    " features, got " + std::to_string(x.cols()));
  }
  const auto d = x.cols();
  Eigen::MatrixXd z = x * weights.topRows(d);
  z.rowwise() += weights.row(d);
  return z;
}

std::vector<std::string> ProbeModel::PredictLabels(
    const Eigen::MatrixXd& x) const {
  if (kind != ProbeKind::kClassifier) {
    throw Error(ErrorCode::kInvalidArgument,
                "label prediction needs a classifier probe");
  }
  const Eigen::MatrixXd z = Scores(x);
  std::vector<std::string> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c) {
      if (z(i, c) > z(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

std::vector<double> ProbeModel::PredictValues(const Eigen::MatrixXd& x) const {
  if (kind != ProbeKind::kRegressor) {
    throw Error(ErrorCode::kInvalidArgument,
                "value prediction needs a regressor probe");
  }
  const Eigen::MatrixXd z = Scores(x);
  return {z.data(), z.data() + z.rows()};
}

double SoftmaxObjective(const Eigen::MatrixXd& weights,
                        const Eigen::MatrixXd& x, std::span<const int> y,
                        double lambda, Eigen::MatrixXd* grad) {
  const auto d = x.cols();
  const auto classes = weights.cols();
  Eigen::MatrixXd z = x * weights.topRows(d);
  z.rowwise() += weights.row(d);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    Eigen::RowVectorXd e = (z.row(i).array() - m).exp().matrix();
    const double sum = e.sum();
    const auto yi = static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]);
    loss += m + std::log(sum) - z(i, yi);
    if (grad) {
      z.row(i) = e / sum;  // reuse as probabilities
      z(i, yi) -= 1.0;
    }
  }
  const double penalty = 0.5 * lambda * weights.topRows(d).squaredNorm();
  if (grad) {
    grad->resize(d + 1, classes);
    grad->topRows(d) = x.transpose() * z + lambda * weights.topRows(d);
    grad->row(d) = z.colwise().sum();
  }
  return loss + penalty;
}

ProbeModel TrainClassifierProbe(const Eigen::MatrixXd& x,
                                std::span<const std::string> y,
                                const ClassifierOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "classifier probe needs matching, non-empty rows and labels");
  }
  if (!(options.lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  }
  CheckFinite(x);
  ProbeModel m;
  m.kind = ProbeKind::kClassifier;
  m.lambda = options.lambda;
  const std::set<std::string> distinct(y.begin(), y.end());
  m.classes.assign(distinct.begin(), distinct.end());
  if (m.classes.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "classifier probe needs at least two classes");
  }
  std::vector<int> yi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yi[i] = static_cast<int>(
        std::lower_bound(m.classes.begin(), m.classes.end(), y[i]) -
        m.classes.begin());
  }
  const auto rows = x.cols() + 1;
  const auto cols = static_cast<Eigen::Index>(m.classes.size());
  Eigen::MatrixXd w(rows, cols);
  Eigen::MatrixXd g(rows, cols);
  const Objective f = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    w = Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
    const double value = SoftmaxObjective(w, x, yi, options.lambda, &g);
    *grad = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    return value;
  };
  LbfgsOptions lo;
  lo.tol = options.tol;
  lo.max_iter = options.max_iter;
  const LbfgsResult r =
      MinimizeLbfgs(f, Eigen::VectorXd::Zero(rows * cols), lo);
  m.weights = Eigen::Map<const Eigen::MatrixXd>(r.x.data(), rows, cols);
  m.iterations = r.iterations;
  m.gradient_norm = r.gradient_norm;
  m.converged = r.converged;
  return m;
}

ProbeModel TrainRegressorProbe(const Eigen::MatrixXd& x,
                               std::span<const double> y, double lambda) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "regressor probe needs matching, non-empty rows and targets");
  }
  if (!(lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  }
  CheckFinite(x);
  const Eigen::Map<const Eigen::VectorXd> t(y.data(),
                                            static_cast<Eigen::Index>(y.size()));
  if (!t.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "regression targets must be finite");
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double t_mean = t.mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean;
  const Eigen::VectorXd tc = t.array() - t_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success ||
      (lambda == 0.0 &&
       !(pivots.size() > 0 && pivots.minCoeff() > 1e-12 * pivots.maxCoeff()))) {
    throw Error(ErrorCode::kComputation,
                "ridge system is singular with lambda = 0; use lambda > 0");
  }
  const Eigen::VectorXd w = ldlt.solve(xc.transpose() * tc);
  ProbeModel m;
  m.kind = ProbeKind::kRegressor;
  m.lambda = lambda;
  m.weights.resize(x.cols() + 1, 1);
  m.weights.topRows(x.cols()) = w;
  m.weights(x.cols(), 0) = t_mean - mean.dot(w);
  if (!m.weights.allFinite()) {
    throw Error(ErrorCode::kComputation, "ridge weights are not finite");
  }
  return m;
}

std::vector<ClassScore> PerClassScores(std::span<const std::string> truth,
                                       std::span<const std::string> pred) {
  if (truth.size() != pred.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "truth and prediction lengths differ");
  }
  std::set<std::string> labels(truth.begin(), truth.end());
  labels.insert(pred.begin(), pred.end());
  std::vector<ClassScore> out;
  for (const auto& label : labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == label;
      const bool p = pred[i] == label;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    ClassScore s;
    s.label = label;
    s.support = tp + fn;
    s.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    s.f1 = 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    out.push_back(std::move(s));
  }
  return out;
}

double MacroF1(std::span<const std::string> truth,
               std::span<const std::string> pred) {
  if (truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  const auto scores = PerClassScores(truth, pred);
  double sum = 0.0;
  for (const auto& s : scores) sum += s.f1;
  return sum / static_cast<double>(scores.size());
}

double RSquared(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "truth and prediction lengths differ");
  }
  if (truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  const double mean = Mean(truth);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

std::pair<double, double> BootstrapInterval(
    std::size_t n, std::size_t draws, double alpha, std::uint64_t seed,
    const std::function<double(std::span<const std::size_t>)>& statistic) {
  if (draws == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bootstrap draws must be >= 1");
  }
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
  std::vector<double> stats(draws);
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < draws; ++b) {
    Rng rng = Rng::Substream(seed, {b});
    for (auto& i : idx) i = static_cast<std::size_t>(rng.UniformIndex(n));
    stats[b] = statistic(idx);
  }
  std::sort(stats.begin(), stats.end());
  return {QuantileSorted(stats, alpha / 2.0),
          QuantileSorted(stats, 1.0 - alpha / 2.0)};
}

ProbeReport BootstrapMacroF1(std::span<const std::string> truth,
                             std::span<const std::string> pred,
                             std::size_t draws, double alpha,
                             std::uint64_t seed) {
  ProbeReport r;
  r.metric_name = "macro_f1";
  r.point = MacroF1(truth, pred);
  r.per_class = PerClassScores(truth, pred);
  r.n = truth.size();
  r.draws = draws;
  std::vector<std::string> t(truth.size()), p(truth.size());
  std::tie(r.ci_low, r.ci_high) = BootstrapInterval(
      truth.size(), draws, alpha, seed, [&](std::span<const std::size_t> ix) {
        for (std::size_t i = 0; i < ix.size(); ++i) {
          t[i] = truth[ix[i]];
          p[i] = pred[ix[i]];
        }
        return MacroF1(t, p);
      });
  return r;
}

ProbeReport BootstrapRSquared(std::span<const double> truth,
                              std::span<const double> pred, std::size_t draws,
                              double alpha, std::uint64_t seed) {
  ProbeReport r;
  r.metric_name = "r2";
  r.point = RSquared(truth, pred);
  r.n = truth.size();
  r.draws = draws;
  std::vector<double> t(truth.size()), p(truth.size());
  std::tie(r.ci_low, r.ci_high) = BootstrapInterval(
      truth.size(), draws, alpha, seed, [&](std::span<const std::size_t> ix) {
        for (std::size_t i = 0; i < ix.size(); ++i) {
          t[i] = truth[ix[i]];
          p[i] = pred[ix[i]];
        }
        return RSquared(t, p);
      });
  return r;
}

double EvaluateClassifier(const ProbeModel& model, const Eigen::MatrixXd& x,
                          std::span<const std::string> truth) {
  if (truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  const auto pred = model.PredictLabels(x);
  return MacroF1(truth, pred);
}

double EvaluateRegressor(const ProbeModel& model, const Eigen::MatrixXd& x,
                         std::span<const double> truth) {
  if (truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  const auto pred = model.PredictValues(x);
  return RSquared(truth, pred);
}

std::vector<ProbeFieldSpec> DefaultProbeFields() {
  return {{"origin", ProbeKind::kClassifier, 1.0},
          {"fst", ProbeKind::kClassifier, 1.0},
          {"age", ProbeKind::kRegressor, 1.0},
          {"gender", ProbeKind::kClassifier, 1.0},
          {"body_region", ProbeKind::kClassifier, 1.0}};
}

std::optional<std::string> ProbeLabel(const MetadataRecord& r,
                                      std::string_view field) {
  if (field == "fst") {
    if (!r.fst) return std::nullopt;
    return std::to_string(*r.fst);
  }
  if (field == "gender") return r.gender;
  if (field == "origin") return r.origin;
  if (field == "body_region") return r.body_region;
  if (field == "modality") return r.modality;
  if (field == "label") return r.label;
  if (field == "icd") return r.icd;
  throw Error(ErrorCode::kNotFound,
              "field '" + std::string(field) + "' is not a categorical target");
}

std::optional<double> ProbeTarget(const MetadataRecord& r,
                                  std::string_view field) {
  if (field == "age") return r.age;
  if (field == "fst") {
    if (!r.fst) return std::nullopt;
    return static_cast<double>(*r.fst);
  }
  throw Error(ErrorCode::kNotFound,
              "field '" + std::string(field) + "' is not a continuous target");
}

namespace {

bool HasTarget(const MetadataRecord& r, const ProbeFieldSpec& spec) {
  return spec.kind == ProbeKind::kClassifier
             ? ProbeLabel(r, spec.field).has_value()
             : ProbeTarget(r, spec.field).has_value();
}

ProbeModel Fit(const Corpus& corpus, const Eigen::MatrixXd& x,
               std::span<const std::size_t> rows, const ProbeFieldSpec& spec,
               const ProbeProtocolOptions& options) {
  const Eigen::MatrixXd xs = SelectRows(x, rows);
  ProbeModel m;
  if (spec.kind == ProbeKind::kClassifier) {
    std::vector<std::string> y;
    for (std::size_t r : rows) y.push_back(*ProbeLabel(corpus.record(r), spec.field));
    ClassifierOptions co;
    co.lambda = spec.lambda;
    co.tol = options.tol;
    co.max_iter = options.max_iter;
    m = TrainClassifierProbe(xs, y, co);
  } else {
    std::vector<double> y;
    for (std::size_t r : rows) y.push_back(*ProbeTarget(corpus.record(r), spec.field));
    m = TrainRegressorProbe(xs, y, spec.lambda);
  }
  m.target_field = spec.field;
  return m;
}

ProbeEvaluation Evaluate(const Corpus& corpus, const Eigen::MatrixXd& x,
                         const ProbeModel& model, const ProbeFieldSpec& spec,
                         const std::string& split,
                         std::span<const std::size_t> rows,
                         const ProbeProtocolOptions& options) {
  ProbeEvaluation ev;
  ev.split = split;
  const std::uint64_t seed =
      Rng::Substream(options.seed, {Fnv1a(spec.field), Fnv1a(split)})
          .NextU64();
  const Eigen::MatrixXd xs = SelectRows(x, rows);
  if (spec.kind == ProbeKind::kClassifier) {
    std::vector<std::string> truth;
    for (std::size_t r : rows) truth.push_back(*ProbeLabel(corpus.record(r), spec.field));
    const auto pred = model.PredictLabels(xs);
    ev.report =
        BootstrapMacroF1(truth, pred, options.draws, options.alpha, seed);
    if (spec.field == "fst") {
      std::vector<std::string> tg, pg;
      for (const auto& s : truth) tg.push_back(GroupLabel(spec.field, s));
      for (const auto& s : pred) pg.push_back(GroupLabel(spec.field, s));
      ev.grouped =
          BootstrapMacroF1(tg, pg, options.draws, options.alpha, seed + 1);
    }
  } else {
    std::vector<double> truth;
    for (std::size_t r : rows) truth.push_back(*ProbeTarget(corpus.record(r), spec.field));
    const auto pred = model.PredictValues(xs);
    ev.report =
        BootstrapRSquared(truth, pred, options.draws, options.alpha, seed);
    if (spec.field == "age") {
      std::vector<std::string> tg, pg;
      for (double v : truth) tg.push_back(AgeBin(v));
      for (double v : pred) pg.push_back(AgeBin(std::max(v, 0.0)));
      ev.grouped =
          BootstrapMacroF1(tg, pg, options.draws, options.alpha, seed + 1);
    }
  }
  return ev;
}

std::size_t IdOverlap(const Corpus& corpus, std::span<const std::size_t> a,
                      std::span<const std::size_t> b) {
  std::unordered_set<std::string> ids;
  for (std::size_t r : a) ids.insert(corpus.record(r).id);
  std::size_t overlap = 0;
  for (std::size_t r : b) overlap += ids.count(corpus.record(r).id);
  return overlap;
}

std::size_t ClassCount(const Corpus& corpus, std::span<const std::size_t> rows,
                       const ProbeFieldSpec& spec) {
  std::set<std::string> classes;
  for (std::size_t r : rows) classes.insert(*ProbeLabel(corpus.record(r), spec.field));
  return classes.size();
}

}  // namespace

ProbeSuite RunProbeSuite(const Corpus& corpus,
                         std::span<const ProbeFieldSpec> specs,
                         const ProbeProtocolOptions& options) {
  if (!(options.eval_fraction >= 0.0 && options.eval_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "eval_fraction must lie in [0, 1)");
  }
  ProbeSuite suite;
  const auto datasets = corpus.Datasets();
  std::set<std::string> held_out;
  for (const auto& name : options.held_out_datasets) {
    if (!std::binary_search(datasets.begin(), datasets.end(), name)) {
      suite.warnings.push_back("held-out dataset '" + name +
                               "' is not in the corpus");
    }
    held_out.insert(name);
  }
  const Eigen::MatrixXd x = corpus.embeddings().ToDouble();
  std::vector<FieldProbeResult> results(specs.size());
  std::vector<std::optional<ProbeModel>> models(specs.size());

  ParallelFor(specs.size(), options.workers, [&](std::size_t f) {
    const ProbeFieldSpec& spec = specs[f];
    FieldProbeResult& res = results[f];
    res.spec = spec;
    std::vector<std::size_t> labeled;
    std::map<std::string, std::vector<std::size_t>> held_rows;
    for (std::size_t r = 0; r < corpus.size(); ++r) {
      const auto& rec = corpus.record(r);
      if (!HasTarget(rec, spec)) continue;
      if (held_out.count(rec.dataset)) {
        held_rows[rec.dataset].push_back(r);
      } else {
        labeled.push_back(r);
      }
    }
    res.n_labeled = labeled.size();
    const bool classifier = spec.kind == ProbeKind::kClassifier;
    if (labeled.empty() ||
        (classifier && ClassCount(corpus, labeled, spec) < 2)) {
      res.skipped = true;
      res.warning = labeled.empty()
                        ? "no training data for field '" + spec.field + "'"
                        : "field '" + spec.field + "' has a single class";
      return;
    }

    // Seeded split: the first n_eval shuffled rows form the internal eval set.
    std::vector<std::size_t> order = labeled;
    Rng rng = Rng::Substream(options.seed, {Fnv1a(spec.field)});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.UniformIndex(i)]);
    }
    std::size_t n_eval = static_cast<std::size_t>(
        std::floor(options.eval_fraction * static_cast<double>(order.size())));
    n_eval = std::min(n_eval, order.size() - 1);
    std::vector<std::size_t> eval(order.begin(), order.begin() + n_eval);
    std::vector<std::size_t> train(order.begin() + n_eval, order.end());
    std::sort(eval.begin(), eval.end());
    std::sort(train.begin(), train.end());
    if (classifier && ClassCount(corpus, train, spec) < 2) {
      res.skipped = true;
      res.warning =
          "training split for field '" + spec.field + "' has a single class";
      return;
    }
    res.n_train = train.size();
    res.train_rows = train;
    const ProbeModel model = Fit(corpus, x, train, spec, options);
    res.classes = model.classes;
    res.iterations = model.iterations;
    res.gradient_norm = model.gradient_norm;
    res.converged = model.converged;

    const auto add_eval = [&](const std::string& split,
                              const std::vector<std::size_t>& rows) {
      const std::size_t overlap = IdOverlap(corpus, train, rows);
      if (overlap != 0) {
        throw Error(ErrorCode::kComputation,
                    "evaluation split '" + split + "' for field '" +
                        spec.field + "' shares ids with the training split");
      }
      ProbeEvaluation ev =
          Evaluate(corpus, x, model, spec, split, rows, options);
      ev.train_overlap = overlap;
      ev.rows = rows;
      res.evaluations.push_back(std::move(ev));
    };
    if (!eval.empty()) add_eval("internal", eval);
    for (const auto& [name, rows] : held_rows) add_eval(name, rows);

    models[f] = Fit(corpus, x, labeled, spec, options);
  });

  for (std::size_t f = 0; f < specs.size(); ++f) {
    if (results[f].skipped) suite.warnings.push_back(results[f].warning);
    if (models[f]) suite.models.push_back(std::move(*models[f]));
    suite.fields.push_back(std::move(results[f]));
  }
  return suite;
}

Imputation ImputeMissing(const Corpus& corpus,
                         std::span<const ProbeModel> models) {
  Imputation out;
  out.records = corpus.records();
  out.provenance.resize(corpus.size());
  const Eigen::MatrixXd x = corpus.embeddings().ToDouble();
  const double total = static_cast<double>(corpus.size());
  for (const auto& model : models) {
    if (model.features() != corpus.dim()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "probe for '" + model.target_field + "' expects " +
                      std::to_string(model.features()) + " features");
    }
    const std::string& field = model.target_field;
    const bool classifier = model.kind == ProbeKind::kClassifier;
    std::vector<std::size_t> missing;
    FieldCoverage cov;
    cov.field = field;
    cov.total = corpus.size();
    for (std::size_t r = 0; r < corpus.size(); ++r) {
      const auto& rec = corpus.record(r);
      const bool present = classifier ? ProbeLabel(rec, field).has_value()
                                      : ProbeTarget(rec, field).has_value();
      if (present) {
        out.provenance[r][field] = Provenance::kOriginal;
        ++cov.before;
      } else {
        missing.push_back(r);
      }
    }
    if (!missing.empty()) {
      const Eigen::MatrixXd xs = SelectRows(x, missing);
      if (classifier) {
        const auto pred = model.PredictLabels(xs);
        for (std::size_t i = 0; i < missing.size(); ++i) {
          SetField(out.records[missing[i]], field, pred[i]);
        }
      } else {
        if (field != "age") {
          throw Error(ErrorCode::kNotFound,
                      "field '" + field + "' cannot be imputed by regression");
        }
        const auto pred = model.PredictValues(xs);
        for (std::size_t i = 0; i < missing.size(); ++i) {
          out.records[missing[i]].age = std::max(pred[i], 0.0);
        }
      }
      for (std::size_t r : missing) {
        out.provenance[r][field] = Provenance::kImputed;
      }
    }
    cov.after = cov.before + missing.size();
    out.imputed += missing.size();
    if (total > 0) {
      cov.before_pct = 100.0 * static_cast<double>(cov.before) / total;
      cov.after_pct = 100.0 * static_cast<double>(cov.after) / total;
    }
    cov.delta_pp = cov.after_pct - cov.before_pct;
    out.coverage.push_back(std::move(cov));
  }
  if (!out.coverage.empty()) {
    double sum = 0.0;
    for (const auto& c : out.coverage) sum += c.delta_pp;
    out.mean_delta_pp = sum / static_cast<double>(out.coverage.size());
  }
  return out;
}

nlohmann::json ImputedRecordJson(const MetadataRecord& record,
                                 const std::map<std::string, Provenance>& p) {
  nlohmann::json obj = RecordToJson(record);
  nlohmann::json prov = nlohmann::json::object();
  for (const auto& [field, source] : p) prov[field] = ProvenanceName(source);
  obj["provenance"] = std::move(prov);
  return obj;
}

}  // namespace atlas
