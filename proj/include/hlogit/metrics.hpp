#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hlogit/csv.hpp"
#include "hlogit/errors.hpp"
#include "hlogit/mixed.hpp"

namespace hlogit {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

// 0/0 cases surface as empty optionals rather than a silent 0.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  ConfusionCounts counts;
  Metrics metrics;
  std::vector<RocPoint> roc;
  double auc = 0.0;
  double threshold = 0.5;
};

namespace detail {

inline void check_eval_input(const Eigen::VectorXd& labels, const Eigen::VectorXd& scores) {
  if (labels.size() != scores.size())
    fail(errc::length_mismatch, std::to_string(labels.size()) + " labels vs " +
                                    std::to_string(scores.size()) + " scores");
  if (labels.size() == 0) fail(errc::empty_input, "no rows to evaluate");
}

inline std::pair<long, long> class_counts(const Eigen::VectorXd& labels) {
  long pos = 0;
  for (long i = 0; i < labels.size(); ++i) pos += labels(i) > 0.5 ? 1 : 0;
  return {pos, labels.size() - pos};
}

}  // namespace detail

// Ties go to the positive class: predicted positive iff score >= threshold.
inline ConfusionCounts confusion(const Eigen::VectorXd& labels, const Eigen::VectorXd& scores,
                                 double threshold = 0.5) {
  detail::check_eval_input(labels, scores);
  ConfusionCounts c;
  for (long i = 0; i < labels.size(); ++i) {
    const bool truth = labels(i) > 0.5;
    const bool pred = scores(i) >= threshold;
    if (pred && truth) ++c.tp;
    else if (pred && !truth) ++c.fp;
    else if (!pred && truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline Metrics metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) fail(errc::empty_input, "no counts to summarise");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

// Threshold sweep over the distinct score values (plus the implicit +inf
// start): one step per distinct score, so tied scores merge into one segment.
inline std::vector<RocPoint> roc_curve(const Eigen::VectorXd& labels,
                                       const Eigen::VectorXd& scores) {
  detail::check_eval_input(labels, scores);
  const auto [P, N] = detail::class_counts(labels);
  if (P == 0 || N == 0) fail(errc::one_class_only, "need both classes for a ROC curve");

  std::vector<long> idx(static_cast<std::size_t>(labels.size()));
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) { return scores(a) > scores(b); });

  std::vector<RocPoint> pts{{0.0, 0.0}};
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores(idx[j]) == scores(idx[i])) {
      if (labels(idx[j]) > 0.5) ++tp;
      else ++fp;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(N),
                   static_cast<double>(tp) / static_cast<double>(P)});
    i = j;
  }
  return pts;
}

// Mann-Whitney statistic via average ranks: the fraction of (positive,
// negative) pairs ranked concordantly, ties counting one half.
inline double auc(const Eigen::VectorXd& labels, const Eigen::VectorXd& scores) {
  detail::check_eval_input(labels, scores);
  const auto [P, N] = detail::class_counts(labels);
  if (P == 0 || N == 0) fail(errc::one_class_only, "need both classes for AUC");

  std::vector<long> idx(static_cast<std::size_t>(labels.size()));
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) { return scores(a) < scores(b); });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    long pos_in_block = 0;
    while (j < idx.size() && scores(idx[j]) == scores(idx[i])) {
      if (labels(idx[j]) > 0.5) ++pos_in_block;
      ++j;
    }
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    pos_rank_sum += avg_rank * static_cast<double>(pos_in_block);
    i = j;
  }
  const double U = pos_rank_sum - 0.5 * static_cast<double>(P) * static_cast<double>(P + 1);
  return U / (static_cast<double>(P) * static_cast<double>(N));
}

// Trapezoidal area under a ROC point list; equals auc() on the same data.
inline double roc_area(const std::vector<RocPoint>& pts) {
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    area += 0.5 * (pts[k].fpr - pts[k - 1].fpr) * (pts[k].tpr + pts[k - 1].tpr);
  return area;
}

// Prevalence-matched cutoff: predict positive for the top-k scores where k is
// the observed positive count (ties may admit a few more).
inline double threshold_for_prevalence(const Eigen::VectorXd& labels,
                                       const Eigen::VectorXd& scores) {
  detail::check_eval_input(labels, scores);
  const auto [P, N] = detail::class_counts(labels);
  (void)N;
  if (P == 0) return 1.0;  // scores live in (0,1): nothing predicted positive
  std::vector<double> s(scores.data(), scores.data() + scores.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s[static_cast<std::size_t>(P - 1)];
}

inline EvalReport evaluate_scores(const Eigen::VectorXd& labels, const Eigen::VectorXd& scores,
                                  double threshold = 0.5) {
  EvalReport rep;
  rep.threshold = threshold;
  rep.counts = confusion(labels, scores, threshold);
  rep.metrics = metrics(rep.counts);
  rep.roc = roc_curve(labels, scores);
  rep.auc = auc(labels, scores);
  return rep;
}

struct FittedModel {
  std::string name;
  std::variant<GlmFit, MixedFit> fit;
};

struct ComparisonReport {
  std::vector<FittedModel> models;
  std::vector<EvalReport> evals;  // parallel to models
  double threshold = 0.5;
  PredictMode mode = PredictMode::conditional;
  bool prevalence_matched = false;
};

inline Eigen::VectorXd model_scores(const FittedModel& m, const DesignMatrices& d,
                                    PredictMode mode) {
  if (std::holds_alternative<GlmFit>(m.fit)) return predict_glm(std::get<GlmFit>(m.fit), d);
  return predict_mixed(std::get<MixedFit>(m.fit), d, mode);
}

inline ComparisonReport compare_models(const std::vector<FittedModel>& models,
                                       const DesignMatrices& test_design, double threshold = 0.5,
                                       PredictMode mode = PredictMode::conditional,
                                       bool prevalence_matched = false) {
  if (models.empty()) fail(errc::empty_comparison, "no models to compare");
  ComparisonReport rep;
  rep.models = models;
  rep.threshold = threshold;
  rep.mode = mode;
  rep.prevalence_matched = prevalence_matched;
  for (const FittedModel& m : models) {
    const Eigen::VectorXd scores = model_scores(m, test_design, mode);
    const double t =
        prevalence_matched ? threshold_for_prevalence(test_design.y, scores) : threshold;
    rep.evals.push_back(evaluate_scores(test_design.y, scores, t));
  }
  return rep;
}

inline void write_roc_csv(const std::vector<RocPoint>& pts, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  out << "fpr,tpr\n";
  for (const RocPoint& p : pts)
    out << csv::format_sig6(p.fpr) << ',' << csv::format_sig6(p.tpr) << "\n";
}

inline void write_metrics_csv(const ComparisonReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  out << "model,threshold,accuracy,precision,recall,f1,auc\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? csv::format_sig6(*v) : std::string("NA");
  };
  for (std::size_t k = 0; k < rep.models.size(); ++k) {
    const EvalReport& e = rep.evals[k];
    out << rep.models[k].name << ',' << csv::format_sig6(e.threshold) << ','
        << csv::format_sig6(e.metrics.accuracy) << ',' << cell(e.metrics.precision) << ','
        << cell(e.metrics.recall) << ',' << cell(e.metrics.f1) << ','
        << csv::format_sig6(e.auc) << "\n";
  }
}

}  // namespace hlogit
