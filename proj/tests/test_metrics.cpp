#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "nmdps/error.hpp"
#include "nmdps/metrics.hpp"
#include "nmdps/rng.hpp"

using namespace nmdps;

TEST_SUITE("metrics") {

TEST_CASE("confusion counts example") {
  std::vector<Prediction> p{{"a", 0.9, 1}, {"b", 0.7, 1}, {"c", 0.6, 0}, {"d", 0.1, 0}};
  MetricsReport r = evaluate(p);
  CHECK(r.tp == 2);
  CHECK(r.fp == 1);
  CHECK(r.tn == 1);
  CHECK(r.fn == 0);
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.f1_rumor == doctest::Approx(0.8));
  CHECK(r.f1_nonrumor == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("perfect and degenerate predictions") {
  std::vector<Prediction> good{{"a", 0.9, 1}, {"b", 0.2, 0}};
  MetricsReport r = evaluate(good);
  CHECK(r.accuracy == 1.0);
  CHECK(r.f1_rumor == 1.0);
  CHECK(r.f1_nonrumor == 1.0);
  std::vector<Prediction> all_rumor{{"a", 0.9, 0}, {"b", 0.8, 0}};
  CHECK(evaluate(all_rumor).f1_nonrumor == 0.0);
  CHECK(evaluate(all_rumor).f1_rumor == 0.0);
  CHECK_THROWS_AS(evaluate(std::vector<Prediction>{}), Error);
  CHECK_THROWS_AS(evaluate(good, 1.0), Error);
}

TEST_CASE("threshold is inclusive") {
  std::vector<Prediction> p{{"a", 0.5, 1}};
  CHECK(evaluate(p).tp == 1);
}

TEST_CASE("polarity swap and order invariance") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Prediction> p(1 + rng.below(30));
    for (auto& x : p) {
      // Avoid exactly 0.5 so flipping 1 - y_hat flips the decision.
      x.y_hat = rng.uniform() < 0.5 ? rng.uniform(0.0, 0.49) : rng.uniform(0.51, 1.0);
      x.label = static_cast<int>(rng.below(2));
    }
    MetricsReport r = evaluate(p);
    CHECK(r.total() == p.size());
    auto flipped = p;
    for (auto& x : flipped) {
      x.y_hat = 1.0 - x.y_hat;
      x.label = 1 - x.label;
    }
    MetricsReport f = evaluate(flipped);
    CHECK(f.accuracy == r.accuracy);
    CHECK(f.f1_rumor == doctest::Approx(r.f1_nonrumor));
    CHECK(f.f1_nonrumor == doctest::Approx(r.f1_rumor));
    auto shuffled = p;
    rng.shuffle(shuffled);
    MetricsReport s = evaluate(shuffled);
    CHECK(s.tp == r.tp);
    CHECK(s.tn == r.tn);
  }
}

TEST_CASE("fold aggregation and CSV") {
  MetricsReport a = report_from_counts(2, 0, 2, 0), b = report_from_counts(1, 1, 1, 1);
  MetricsReport agg = aggregate_folds({a, b});
  CHECK(agg.tp == 3);
  CHECK(agg.total() == 8);
  CHECK(agg.accuracy == doctest::Approx(6.0 / 8.0));
  CHECK(agg.mean_accuracy() == doctest::Approx(0.75));
  std::ostringstream out;
  write_report_csv(out, "full", agg);
  CHECK(out.str() ==
        "variant,fold,accuracy,f1_rumor,f1_nonrumor\n"
        "full,0,1.000000,1.000000,1.000000\n"
        "full,1,0.500000,0.500000,0.500000\n"
        "full,mean,0.750000,0.750000,0.750000\n");
  TableRow row{"full", agg};
  const std::string table = render_table(std::span<const TableRow>(&row, 1));
  CHECK(table.find("0.750") != std::string::npos);
}

TEST_CASE("prediction CSV") {
  std::vector<Prediction> p{{"e1", 0.25, 0}};
  std::ostringstream out;
  write_predictions_csv(out, "content_only", p);
  CHECK(out.str() == "event_id,y_hat,label,variant\ne1,0.250000,0,content_only\n");
}

}  // TEST_SUITE
