#include "drocc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drocc/kvtext.hpp"

namespace drocc {

ScoredSet ScoredSet::from(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  ScoredSet s;
  s.scores.assign(pos_scores.begin(), pos_scores.end());
  s.scores.insert(s.scores.end(), neg_scores.begin(), neg_scores.end());
  s.labels.assign(pos_scores.size(), Label::positive);
  s.labels.insert(s.labels.end(), neg_scores.size(), Label::negative);
  return s;
}

namespace {

void check_set(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) throw ContractError("ScoredSet: length mismatch");
  for (double s : set.scores) {
    if (!std::isfinite(s)) throw ContractError("ScoredSet: non-finite score");
  }
}

}  // namespace

double auroc(const ScoredSet& set) {
  check_set(set);
  const std::size_t n = set.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && set.scores[order[j]] == set.scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (set.labels[order[k]] == Label::positive) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ContractError("auroc: need at least one row of each label");
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::size_t contamination_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

F1Result f1_at_contamination(const ScoredSet& set, double ratio) {
  check_set(set);
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("f1_at_contamination: ratio must be in (0, 1)");
  const std::size_t n = set.scores.size();
  const std::size_t k = contamination_count(n, ratio);
  if (k == 0 || k >= n) throw ContractError("f1_at_contamination: ratio * n rounds to 0 or n");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  std::size_t true_pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (set.labels[order[i]] == Label::negative) ++true_pos;
  }
  const auto anomalies = static_cast<std::size_t>(
      std::count(set.labels.begin(), set.labels.end(), Label::negative));
  F1Result r;
  r.flagged = k;
  r.threshold = set.scores[order[k - 1]];
  r.precision = static_cast<double>(true_pos) / static_cast<double>(k);
  r.recall = anomalies == 0 ? 0.0 : static_cast<double>(true_pos) / static_cast<double>(anomalies);
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

double recall_above(std::span<const double> pos_scores, double threshold) {
  if (pos_scores.empty()) throw ContractError("recall: empty positive scores");
  const auto hits = std::count_if(pos_scores.begin(), pos_scores.end(),
                                  [&](double s) { return s > threshold; });
  return static_cast<double>(hits) / static_cast<double>(pos_scores.size());
}

RecallAtFpr recall_at_fpr(std::span<const double> pos_scores, std::span<const double> neg_scores,
                          double fpr) {
  if (!(fpr > 0.0 && fpr < 1.0)) throw ContractError("recall_at_fpr: fpr must be in (0, 1)");
  if (pos_scores.empty() || neg_scores.empty()) throw ContractError("recall_at_fpr: empty inputs");
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(neg.begin(), neg.end());
  const std::size_t n = neg.size();
  const auto allowed = static_cast<std::size_t>(std::floor(fpr * static_cast<double>(n)));
  RecallAtFpr r;
  r.threshold = neg[n - 1 - std::min(allowed, n - 1)];
  r.recall = recall_above(pos_scores, r.threshold);
  const auto above = std::count_if(neg.begin(), neg.end(), [&](double s) { return s > r.threshold; });
  r.realized_fpr = static_cast<double>(above) / static_cast<double>(n);
  return r;
}

double nn_score(const Tensor2& train_features, std::span<const double> x) {
  if (train_features.rows() == 0) throw ContractError("nn_score: empty training set");
  if (x.size() != train_features.cols()) throw ContractError("nn_score: dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train_features.rows(); ++i) {
    auto t = train_features.row(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - t[j];
      d2 += diff * diff;
    }
    best = std::min(best, d2);
  }
  return -std::sqrt(best);
}

std::vector<double> nn_scores(const Tensor2& train_features, const Tensor2& queries) {
  std::vector<double> out(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) out[i] = nn_score(train_features, queries.row(i));
  return out;
}

EvalReport evaluate(const ScoredSet& set, const EvalOptions& opts,
                    std::span<const double> val_neg_scores) {
  EvalReport rep;
  rep.auroc = auroc(set);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    (set.labels[i] == Label::positive ? pos : neg).push_back(set.scores[i]);
  }
  rep.n_pos = pos.size();
  rep.n_neg = neg.size();
  rep.contamination = opts.contamination > 0.0
                          ? opts.contamination
                          : static_cast<double>(neg.size()) / static_cast<double>(set.scores.size());
  const F1Result f1 = f1_at_contamination(set, rep.contamination);
  rep.f1 = f1.f1;
  rep.precision = f1.precision;
  rep.recall = f1.recall;
  rep.f1_threshold = f1.threshold;

  rep.fpr_threshold_source = val_neg_scores.empty() ? "test" : "validation";
  for (double target : opts.fpr_targets) {
    if (val_neg_scores.empty()) {
      rep.recall_at_fpr[target] = recall_at_fpr(pos, neg, target);
    } else {
      RecallAtFpr r = recall_at_fpr(pos, val_neg_scores, target);
      const auto above = std::count_if(neg.begin(), neg.end(), [&](double s) { return s > r.threshold; });
      r.realized_fpr = static_cast<double>(above) / static_cast<double>(neg.size());
      rep.recall_at_fpr[target] = r;
    }
  }
  return rep;
}

void append_eval(KvDocument& doc, const std::string& prefix, const EvalReport& r) {
  doc.set(prefix, "auroc", format_double(r.auroc));
  doc.set(prefix, "f1", format_double(r.f1));
  doc.set(prefix, "precision", format_double(r.precision));
  doc.set(prefix, "recall", format_double(r.recall));
  doc.set(prefix, "contamination", format_double(r.contamination));
  doc.set(prefix, "f1_threshold", format_double(r.f1_threshold));
  doc.set(prefix, "n_pos", std::to_string(r.n_pos));
  doc.set(prefix, "n_neg", std::to_string(r.n_neg));
  doc.set(prefix, "fpr_threshold_source", r.fpr_threshold_source);
  for (const auto& [fpr, v] : r.recall_at_fpr) {
    const std::string key = prefix + ".fpr_" + format_double(fpr);
    doc.set(key, "recall", format_double(v.recall));
    doc.set(key, "threshold", format_double(v.threshold));
    doc.set(key, "realized_fpr", format_double(v.realized_fpr));
  }
}

EvalReport read_eval(const KvDocument& doc, const std::string& prefix) {
  auto get = [&](std::string_view sec, std::string_view key) -> const std::string& {
    const std::string* v = doc.find(sec, key);
    if (!v) throw std::invalid_argument("eval report: missing [" + std::string(sec) + "] " + std::string(key));
    return *v;
  };
  EvalReport r;
  r.auroc = parse_double(get(prefix, "auroc"));
  r.f1 = parse_double(get(prefix, "f1"));
  r.precision = parse_double(get(prefix, "precision"));
  r.recall = parse_double(get(prefix, "recall"));
  r.contamination = parse_double(get(prefix, "contamination"));
  r.f1_threshold = parse_double(get(prefix, "f1_threshold"));
  r.n_pos = static_cast<std::size_t>(parse_int(get(prefix, "n_pos")));
  r.n_neg = static_cast<std::size_t>(parse_int(get(prefix, "n_neg")));
  r.fpr_threshold_source = get(prefix, "fpr_threshold_source");
  const std::string fpr_prefix = prefix + ".fpr_";
  for (const auto& [name, entries] : doc.sections()) {
    if (name.rfind(fpr_prefix, 0) != 0) continue;
    RecallAtFpr v;
    v.recall = parse_double(get(name, "recall"));
    v.threshold = parse_double(get(name, "threshold"));
    v.realized_fpr = parse_double(get(name, "realized_fpr"));
    r.recall_at_fpr[parse_double(std::string_view(name).substr(fpr_prefix.size()))] = v;
  }
  return r;
}

std::string to_text(const EvalReport& r) {
  KvDocument doc;
  append_eval(doc, "eval", r);
  return doc.to_string();
}

EvalReport eval_report_from_text(const std::string& text) { return read_eval(KvDocument::parse(text), "eval"); }

}  // namespace drocc
