#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "drocc/kvtext.hpp"
#include "drocc/mlp.hpp"
#include "drocc/tensor.hpp"

namespace drocc {

/// Normality scores (higher = more normal) with their true labels.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<Label> labels;

  static ScoredSet from(std::span<const double> pos_scores, std::span<const double> neg_scores);
};

/// Mann-Whitney statistic P(pos > neg) + P(tie)/2 via midranks.
/// Throws ContractError unless both labels are present.
double auroc(const ScoredSet& set);

struct F1Result {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;  // score of the highest-scoring flagged row
  std::size_t flagged = 0;
};

/// Flags the round(ratio * n) lowest-scoring rows as anomalies (ties broken by
/// row order) and scores them against the negative labels.
F1Result f1_at_contamination(const ScoredSet& set, double ratio);

/// Number of rows f1_at_contamination flags: round-half-away-from-zero of ratio*n.
std::size_t contamination_count(std::size_t n, double ratio);

struct RecallAtFpr {
  double recall = 0.0;
  double threshold = 0.0;
  double realized_fpr = 0.0;
};

/// Threshold is the order statistic of the negatives that leaves at most
/// floor(fpr * n_neg) of them strictly above it; recall counts positives
/// strictly above the threshold.
RecallAtFpr recall_at_fpr(std::span<const double> pos_scores, std::span<const double> neg_scores,
                          double fpr);

/// Recall of `pos_scores` at a threshold chosen elsewhere (e.g. on validation negatives).
double recall_above(std::span<const double> pos_scores, double threshold);

/// -min_i ||x - train_i||_2
double nn_score(const Tensor2& train_features, std::span<const double> x);
std::vector<double> nn_scores(const Tensor2& train_features, const Tensor2& queries);

struct EvalReport {
  double auroc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double contamination = 0.0;
  double f1_threshold = 0.0;
  std::map<double, RecallAtFpr> recall_at_fpr;
  std::string fpr_threshold_source = "test";
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

struct EvalOptions {
  std::vector<double> fpr_targets{0.03, 0.05};
  // <= 0 means the true anomaly fraction of the evaluated set.
  double contamination = 0.0;
};

/// All metrics for one scored set. When `val_neg_scores` is non-empty the
/// FPR thresholds are chosen on it instead of on the test negatives.
EvalReport evaluate(const ScoredSet& set, const EvalOptions& opts,
                    std::span<const double> val_neg_scores = {});

/// Writes section `prefix` plus one `prefix.fpr_<target>` section per FPR target.
void append_eval(KvDocument& doc, const std::string& prefix, const EvalReport& r);
EvalReport read_eval(const KvDocument& doc, const std::string& prefix);

/// key = value lines in a fixed order.
std::string to_text(const EvalReport& r);
EvalReport eval_report_from_text(const std::string& text);

}  // namespace drocc
