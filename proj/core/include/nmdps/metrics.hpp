#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nmdps {

struct Prediction {
  std::string event_id;
  double y_hat = 0.5;
  int label = 0;
};

// Confusion counts with rumor as the positive class. For cross-validation
// reports the counts are pooled over `folds`, which hold the per-fold reports.
struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double f1_rumor = 0.0;
  double f1_nonrumor = 0.0;
  std::vector<MetricsReport> folds;

  std::size_t total() const { return tp + fp + tn + fn; }
  // Means over folds; the report's own values when there are no folds.
  double mean_accuracy() const;
  double mean_f1_rumor() const;
  double mean_f1_nonrumor() const;
};

MetricsReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

// Predicts rumor iff y_hat >= threshold.
MetricsReport evaluate(std::span<const Prediction> predictions, double threshold = 0.5);

// Pools fold counts and keeps the folds for the breakdown.
MetricsReport aggregate_folds(std::vector<MetricsReport> folds);

// Header "variant,fold,accuracy,f1_rumor,f1_nonrumor"; one row per fold and a
// final "mean" row.
void write_report_csv(std::ostream& out, const std::string& variant, const MetricsReport& report,
                      bool header = true);

// Header "event_id,y_hat,label,variant".
void write_predictions_csv(std::ostream& out, const std::string& variant,
                           std::span<const Prediction> predictions, bool header = true);

struct TableRow {
  std::string method;
  MetricsReport report;
};

// Accuracy / per-class F1 table with an R and an N row per method.
std::string render_table(std::span<const TableRow> rows);

// Fixed-precision decimal used by every CSV writer so reports compare
// byte-for-byte.
std::string format_number(double v);

}  // namespace nmdps
