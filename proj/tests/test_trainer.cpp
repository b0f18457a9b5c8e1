#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "nmdps/checkpoint.hpp"
#include "nmdps/error.hpp"
#include "nmdps/synthgen.hpp"
#include "nmdps/trainer.hpp"
#include "support.hpp"

using namespace nmdps;

namespace {

std::vector<Event> small_set(std::size_t n, SynthMode mode = SynthMode::both) {
  SynthSpec s;
  s.n_events = n;
  s.mode = mode;
  s.min_posts = 8;
  s.max_posts = 16;
  return generate(s);
}

TrainConfig quick(Variant v = Variant::full) {
  TrainConfig c = test::compact_config();
  c.epochs = 3;
  c.variant = v;
  c.pv_epochs = 3;
  c.pv_infer_epochs = 3;
  c.min_count = 1;
  c.max_windows = 16;
  c.n_max = 16;
  return c;
}

// Sets w's gradient to g through a linear loss.
void set_grad(Tensor& w, const std::vector<double>& g) {
  w.zero_grad();
  ad::backward(ad::sum(ad::mul(w, Tensor(w.shape(), g))));
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("adam first step moves by lr in the gradient sign") {
  Tensor w({1, 2}, {1.0, -1.0}, true);
  std::vector<NamedTensor> ps{{"w", &w}};
  AdamState st = make_adam(ps, 0.1, 0.9, 0.999, 1e-8);
  set_grad(w, {0.5, -3.0});
  adam_step(ps, st);
  CHECK(w(0, 0) == doctest::Approx(0.9));
  CHECK(w(0, 1) == doctest::Approx(-0.9));
  CHECK(st.step == 1);
}

TEST_CASE("adam leaves parameters with zero or missing gradients alone") {
  Tensor w({1, 2}, {1.0, 2.0}, true), u({1, 1}, {3.0}, true);
  std::vector<NamedTensor> ps{{"w", &w}, {"u", &u}};
  AdamState st = make_adam(ps, 0.1, 0.9, 0.999, 1e-8);
  set_grad(w, {0.0, 0.0});
  adam_step(ps, st);
  CHECK(w(0, 0) == 1.0);
  CHECK(w(0, 1) == 2.0);
  CHECK(u(0, 0) == 3.0);
}

TEST_CASE("adam with zero betas is sign descent") {
  Tensor w({1, 3}, {0.0, 0.0, 0.0}, true);
  std::vector<NamedTensor> ps{{"w", &w}};
  AdamState st = make_adam(ps, 0.01, 0.0, 0.0, 1e-12);
  for (int i = 0; i < 5; ++i) {
    set_grad(w, {2.0, -0.001, 1e3});
    adam_step(ps, st);
  }
  CHECK(w(0, 0) == doctest::Approx(-0.05));
  CHECK(w(0, 1) == doctest::Approx(0.05));
  CHECK(w(0, 2) == doctest::Approx(-0.05));
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor w({1, 2}, {3.0, -4.0}, true);
  std::vector<NamedTensor> ps{{"w", &w}};
  AdamState st = make_adam(ps, 0.05, 0.9, 0.999, 1e-8);
  for (int i = 0; i < 500; ++i) {
    w.zero_grad();
    ad::backward(ad::sum(ad::mul(w, w)));
    adam_step(ps, st);
  }
  CHECK(std::abs(w(0, 0)) < 0.05);
  CHECK(std::abs(w(0, 1)) < 0.05);
}

TEST_CASE("config JSON round trip and validation") {
  TrainConfig c = quick(Variant::structure_only);
  c.heights = {2, 4};
  c.ratio_mode = RatioMode::adjacent_window;
  const std::string json = config_to_json(c);
  CHECK(config_to_json(config_from_json(json)) == json);
  CHECK_THROWS_AS(config_from_json(R"({"learning_rate": 0.1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"lr": "fast"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"variant": "both"})"), ConfigError);
  CHECK(config_from_json(R"({"epochs": 7})").epochs == 7);
}

TEST_CASE("shipped config files match the built-in settings") {
  const std::filesystem::path dir = NMDPS_CONFIG_DIR;
  CHECK(config_to_json(load_config(dir / "default.json")) == config_to_json(TrainConfig{}));
  CHECK(config_to_json(load_config(dir / "compact.json")) ==
        config_to_json(test::compact_config()));
}

TEST_CASE("overrides") {
  TrainConfig c;
  apply_override(c, "lr=0.01");
  apply_override(c, "variant=content_only");
  apply_override(c, "heights=[2,3]");
  CHECK(c.lr == 0.01);
  CHECK(c.variant == Variant::content_only);
  CHECK(c.heights == std::vector<std::size_t>{2, 3});
  CHECK_THROWS_AS(apply_override(c, "nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "lr"), ConfigError);
}

TEST_CASE("validation split") {
  auto ev = small_set(40);
  auto [tr, va] = split_validation(ev, 0.1, 3);
  CHECK(tr.size() + va.size() == 40);
  CHECK(va.size() == 4);
  std::size_t rumors = 0;
  for (auto i : va) rumors += ev[i].label == Label::rumor;
  CHECK(rumors == 2);
  auto [all, same] = split_validation(ev, 0.0, 3);
  CHECK(all.size() == 40);
  CHECK(same == all);
}

TEST_CASE("training lacking a class is rejected") {
  auto ev = small_set(10);
  std::vector<Event> one;
  for (auto& e : ev) if (e.label == Label::rumor) one.push_back(e);
  CHECK_THROWS_AS(train_fold(one, one, quick()), Error);
}

TEST_CASE("training is deterministic and parallel folds agree") {
  auto ev = small_set(30);
  TrainConfig c = quick();
  CvResult a = cross_validate(ev, c, 3, 1);
  CvResult b = cross_validate(ev, c, 3, 1);
  CvResult p = cross_validate(ev, c, 3, 3);
  CHECK(a.loss_curves == b.loss_curves);
  CHECK(a.loss_curves == p.loss_curves);
  REQUIRE(a.predictions.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(a.predictions[i].event_id == p.predictions[i].event_id);
    CHECK(a.predictions[i].y_hat == p.predictions[i].y_hat);
  }
  CHECK(a.report.folds.size() == 3);
  for (const auto& curve : a.loss_curves) {
    CHECK(curve.size() == c.epochs);
    for (double l : curve) CHECK(std::isfinite(l));
  }
}

TEST_CASE("test-fold texts do not affect that fold's model") {
  auto ev = small_set(30, SynthMode::content);
  TrainConfig c = quick();
  const FoldPlan plan = make_folds(ev, 3, c.seed);
  auto altered = ev;
  for (std::size_t i : plan.members(ev, 0)) {
    for (auto& p : altered[i].posts) p.text = "completely different words here";
  }
  CvResult a = cross_validate(ev, c, 3), b = cross_validate(altered, c, 3);
  CHECK(a.loss_curves[0] == b.loss_curves[0]);
  CHECK(a.loss_curves[1] != b.loss_curves[1]);
}

TEST_CASE("two folds on four events") {
  auto ev = small_set(4);
  CvResult r = cross_validate(ev, quick(), 2);
  CHECK(r.predictions.size() == 4);
  CHECK(r.report.total() == 4);
  CHECK_THROWS_AS(cross_validate(ev, quick(), 5), Error);
}

TEST_CASE("deadline parsing") {
  CHECK(parse_deadline("90") == 90.0);
  CHECK(parse_deadline("30m") == 1800.0);
  CHECK(parse_deadline("0.5h") == 1800.0);
  CHECK(parse_deadline("12s") == 12.0);
  CHECK(std::isinf(parse_deadline("inf")));
  CHECK_THROWS_AS(parse_deadline("-1"), Error);
  CHECK_THROWS_AS(parse_deadline("soon"), Error);
  CHECK(format_deadline(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_deadline(1800) == "1800");
  CHECK(default_deadlines().size() == 8);
}

TEST_CASE("early detection at an infinite deadline equals cross-validation") {
  auto ev = small_set(20);
  TrainConfig c = quick(Variant::structure_only);
  const double dl[] = {600.0, std::numeric_limits<double>::infinity()};
  auto pts = early_detection_sweep(ev, c, dl, 2);
  CvResult cv = cross_validate(ev, c, 2);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].report.tp == cv.report.tp);
  CHECK(pts[1].report.tn == cv.report.tn);
  CHECK(pts[1].report.accuracy == cv.report.accuracy);
  const double bad[] = {600.0, 300.0};
  CHECK_THROWS_AS(early_detection_sweep(ev, c, bad, 2), Error);
}

}  // TEST_SUITE

TEST_SUITE("checkpoint") {

TEST_CASE("archive round trip") {
  Archive a;
  a.arrays.push_back({"w", {2, 3}, {1, 2, 3, 4, 5, -1e-300}});
  a.arrays.push_back({"b", {1}, {0.1}});
  a.meta_json = R"({"k":[1,2]})";
  Archive b = decode_archive(encode_archive(a));
  CHECK(b.arrays == a.arrays);
  CHECK(b.meta_json == a.meta_json);
  REQUIRE(b.find("b") != nullptr);
  CHECK(b.find("zzz") == nullptr);
  std::string bytes = encode_archive(a);
  CHECK_THROWS_AS(decode_archive(bytes.substr(0, bytes.size() - 3)), Error);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_archive(bytes), Error);
}

TEST_CASE("saved models predict identically after loading") {
  auto ev = small_set(16);
  const auto dir = test::temp_dir("ckpt");
  for (Variant v : {Variant::full, Variant::structure_only_no_attention, Variant::content_only}) {
    CAPTURE(to_string(v));
    FoldResult fr = train_fold(ev, ev, quick(v));
    const auto path = dir / (to_string(v) + ".json");
    save_model(path, fr.model);
    TrainedModel back = load_model(path);
    CHECK(config_to_json(back.config) == config_to_json(fr.model.config));
    auto p1 = fr.model.predict(ev), p2 = back.predict(ev);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].y_hat == p2[i].y_hat);
  }
}

TEST_CASE("pretrained encoders cannot be checkpointed") {
  auto ev = small_set(6);
  TrainConfig c = quick(Variant::content_only);
  PostEmbeddingStore store(c.d_w);
  for (const auto& e : ev)
    for (const auto& p : e.posts) store.set(post_key(e, p), std::vector<double>(c.d_w, 0.1));
  FoldResult fr = train_fold(ev, ev, c, &store);
  CHECK_THROWS_AS(save_model(test::temp_dir("ckpt2") / "m.json", fr.model), Error);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto path = test::temp_dir("ckpt3") / "bad.json";
  std::ofstream(path) << "{\"meta\": 1}";
  CHECK_THROWS_AS(load_model(path), Error);
  CHECK_THROWS_AS(load_model(path.parent_path() / "missing.json"), Error);
}

}  // TEST_SUITE
