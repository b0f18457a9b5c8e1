#include "nmdps/metrics.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "nmdps/error.hpp"

namespace nmdps {

namespace {

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

template <typename F>
double fold_mean(const MetricsReport& r, F field) {
  if (r.folds.empty()) return field(r);
  double s = 0.0;
  for (const auto& f : r.folds) s += field(f);
  return s / static_cast<double>(r.folds.size());
}

}  // namespace

double MetricsReport::mean_accuracy() const {
  return fold_mean(*this, [](const MetricsReport& r) { return r.accuracy; });
}
double MetricsReport::mean_f1_rumor() const {
  return fold_mean(*this, [](const MetricsReport& r) { return r.f1_rumor; });
}
double MetricsReport::mean_f1_nonrumor() const {
  return fold_mean(*this, [](const MetricsReport& r) { return r.f1_nonrumor; });
}

MetricsReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  const std::size_t total = tp + fp + tn + fn;
  r.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  r.f1_rumor = f1(tp, fp, fn);
  // Non-rumor as the positive class swaps the roles of the counts.
  r.f1_nonrumor = f1(tn, fn, fp);
  return r;
}

MetricsReport evaluate(std::span<const Prediction> predictions, double threshold) {
  if (predictions.empty()) throw Error("evaluate: no predictions");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("evaluate: threshold must be in (0, 1)");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const Prediction& p : predictions) {
    const bool predicted = p.y_hat >= threshold;
    const bool actual = p.label == 1;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return report_from_counts(tp, fp, tn, fn);
}

MetricsReport aggregate_folds(std::vector<MetricsReport> folds) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& f : folds) {
    tp += f.tp;
    fp += f.fp;
    tn += f.tn;
    fn += f.fn;
  }
  MetricsReport r = report_from_counts(tp, fp, tn, fn);
  r.folds = std::move(folds);
  return r;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_report_csv(std::ostream& out, const std::string& variant, const MetricsReport& report,
                      bool header) {
  if (header) out << "variant,fold,accuracy,f1_rumor,f1_nonrumor\n";
  for (std::size_t i = 0; i < report.folds.size(); ++i) {
    const auto& f = report.folds[i];
    out << variant << ',' << i << ',' << format_number(f.accuracy) << ','
        << format_number(f.f1_rumor) << ',' << format_number(f.f1_nonrumor) << '\n';
  }
  out << variant << ",mean," << format_number(report.mean_accuracy()) << ','
      << format_number(report.mean_f1_rumor()) << ',' << format_number(report.mean_f1_nonrumor())
      << '\n';
}

void write_predictions_csv(std::ostream& out, const std::string& variant,
                           std::span<const Prediction> predictions, bool header) {
  if (header) out << "event_id,y_hat,label,variant\n";
  for (const auto& p : predictions) {
    out << p.event_id << ',' << format_number(p.y_hat) << ',' << p.label << ',' << variant << '\n';
  }
}

std::string render_table(std::span<const TableRow> rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("Method", width) << "  Class  Accuracy  F1\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "  R      %.3f     %.3f\n", r.report.mean_accuracy(),
                  r.report.mean_f1_rumor());
    out << pad(r.method, width) << line;
    std::snprintf(line, sizeof(line), "  N                %.3f\n", r.report.mean_f1_nonrumor());
    out << pad("", width) << line;
  }
  return out.str();
}

}  // namespace nmdps
