#include <cmath>

#include "doctest.h"
#include "nmdps/error.hpp"
#include "nmdps/model.hpp"
#include "support.hpp"

using namespace nmdps;

namespace {

ModelConfig tiny(Variant v) {
  ModelConfig c;
  c.layer_cap = 2;
  c.d_s = 3;
  c.hidden = 3;
  c.attention = 3;
  c.d_w = 4;
  c.heights = {2, 3};
  c.maps_per_height = 2;
  c.k = 2;
  c.n_max = 6;
  c.fusion_hidden = 4;
  c.dropout = 0.5;
  c.variant = v;
  return c;
}

EventFeatures random_features(Rng& rng, const ModelConfig& c, std::size_t windows,
                              const std::string& id) {
  EventFeatures f;
  f.event_id = id;
  f.n_windows = windows;
  for (std::size_t i = 0; i < windows * 3 * c.layer_cap; ++i) f.structure.push_back(rng.uniform());
  if (uses_content(c.variant)) {
    for (std::size_t i = 0; i < c.n_max * c.d_w; ++i) f.content.push_back(rng.normal());
  }
  return f;
}

double eval_one(const EventFeatures& f, const ModelParams& p, const ModelConfig& c) {
  Rng rng(0);
  const EventFeatures* b[] = {&f};
  return forward(b, p, c, false, rng).y_hat.item();
}

// Plain-double reimplementation used as an oracle.
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

std::vector<double> affine_row(const std::vector<double>& x, const Mat& W, const Mat& b) {
  std::vector<double> y = b[0];
  for (std::size_t j = 0; j < y.size(); ++j)
    for (std::size_t i = 0; i < x.size(); ++i) y[j] += x[i] * W[i][j];
  return y;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> gru(const std::vector<double>& x, const std::vector<double>& h,
                        const GruParams& p) {
  const std::size_t H = h.size();
  auto uz = affine_row(x, to_mat(p.U_z), to_mat(p.b_z)), wz = affine_row(h, to_mat(p.W_z), Mat{std::vector<double>(H)});
  auto ur = affine_row(x, to_mat(p.U_r), to_mat(p.b_r)), wr = affine_row(h, to_mat(p.W_r), Mat{std::vector<double>(H)});
  std::vector<double> z(H), r(H), rh(H);
  for (std::size_t j = 0; j < H; ++j) {
    z[j] = sig(uz[j] + wz[j]);
    r[j] = sig(ur[j] + wr[j]);
    rh[j] = r[j] * h[j];
  }
  auto uh = affine_row(x, to_mat(p.U_h), to_mat(p.b_h)), wh = affine_row(rh, to_mat(p.W_h), Mat{std::vector<double>(H)});
  std::vector<double> out(H);
  for (std::size_t j = 0; j < H; ++j) out[j] = (1 - z[j]) * h[j] + z[j] * std::tanh(uh[j] + wh[j]);
  return out;
}

double oracle_no_attention(const EventFeatures& f, const ModelParams& p, const ModelConfig& c) {
  const std::size_t width = 3 * c.layer_cap, T = f.n_windows, H = c.hidden;
  std::vector<std::vector<double>> xs(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> raw(f.structure.begin() + t * width, f.structure.begin() + (t + 1) * width);
    xs[t] = affine_row(raw, to_mat(p.embed_W), to_mat(p.embed_b));
    for (double& v : xs[t]) v = std::tanh(v);
  }
  std::vector<std::vector<double>> hf(T), hb(T);
  std::vector<double> h(H, 0.0);
  for (std::size_t t = 0; t < T; ++t) hf[t] = h = gru(xs[t], h, p.gru_fwd);
  h.assign(H, 0.0);
  for (std::size_t t = T; t-- > 0;) hb[t] = h = gru(xs[t], h, p.gru_bwd);
  std::vector<double> pooled(2 * H, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < H; ++j) {
      pooled[j] += hf[t][j] / T;
      pooled[H + j] += hb[t][j] / T;
    }
  auto hid = affine_row(pooled, to_mat(p.fusion_W1), to_mat(p.fusion_b1));
  for (double& v : hid) v = std::max(0.0, v);
  return sig(affine_row(hid, to_mat(p.fusion_W2), to_mat(p.fusion_b2))[0]);
}

const Variant kVariants[] = {Variant::full, Variant::structure_only,
                             Variant::structure_only_no_attention, Variant::content_only};

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero parameters give probability one half") {
  for (Variant v : kVariants) {
    ModelConfig c = tiny(v);
    Rng rng(1);
    ModelParams p = ModelParams::init(c, rng);
    for (auto& nt : p.named()) for (double& x : nt.tensor->mutable_values()) x = 0.0;
    EventFeatures f = random_features(rng, c, 3, "a");
    CHECK(eval_one(f, p, c) == doctest::Approx(0.5));
  }
}

TEST_CASE("outputs are probabilities and alphas are distributions") {
  Rng rng(2);
  for (Variant v : kVariants) {
    ModelConfig c = tiny(v);
    ModelParams p = ModelParams::init(c, rng);
    std::vector<EventFeatures> fs;
    for (std::size_t i = 0; i < 5; ++i) fs.push_back(random_features(rng, c, 1 + i, "e"));
    std::vector<const EventFeatures*> batch;
    for (auto& f : fs) batch.push_back(&f);
    Rng d(0);
    ForwardOutput out = forward(batch, p, c, false, d);
    REQUIRE(out.y_hat.rows() == 5);
    for (double y : out.y_hat.values()) {
      CHECK(y > 0.0);
      CHECK(y < 1.0);
    }
    if (v == Variant::full || v == Variant::structure_only) {
      REQUIRE(out.alphas.defined());
      for (std::size_t b = 0; b < 5; ++b) {
        double s = 0;
        for (std::size_t t = 0; t < out.alphas.cols(); ++t) {
          if (t >= fs[b].n_windows) CHECK(out.alphas(b, t) == 0.0);
          s += out.alphas(b, t);
        }
        CHECK(s == doctest::Approx(1.0));
      }
    } else {
      CHECK_FALSE(out.alphas.defined());
    }
  }
}

TEST_CASE("no-attention forward matches a plain reimplementation") {
  Rng rng(3);
  ModelConfig c = tiny(Variant::structure_only_no_attention);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams p = ModelParams::init(c, rng);
    for (auto& nt : p.named()) for (double& x : nt.tensor->mutable_values()) x = rng.uniform(-1, 1);
    EventFeatures f = random_features(rng, c, 1 + rng.below(6), "e");
    CHECK(eval_one(f, p, c) == doctest::Approx(oracle_no_attention(f, p, c)).epsilon(1e-12));
  }
}

TEST_CASE("batching matches one-at-a-time evaluation") {
  Rng rng(4);
  for (Variant v : kVariants) {
    ModelConfig c = tiny(v);
    ModelParams p = ModelParams::init(c, rng);
    std::vector<EventFeatures> fs;
    for (std::size_t i = 0; i < 4; ++i) fs.push_back(random_features(rng, c, 1 + rng.below(5), "e"));
    std::vector<const EventFeatures*> batch;
    for (auto& f : fs) batch.push_back(&f);
    Rng d(0);
    ForwardOutput out = forward(batch, p, c, false, d);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      CHECK(out.y_hat(i, 0) == doctest::Approx(eval_one(fs[i], p, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ablations ignore the removed input") {
  Rng rng(5);
  {
    ModelConfig c = tiny(Variant::content_only);
    ModelParams p = ModelParams::init(c, rng);
    EventFeatures f = random_features(rng, c, 3, "a");
    const double y = eval_one(f, p, c);
    for (double& x : f.structure) x = rng.uniform();
    f.n_windows = 3;
    CHECK(eval_one(f, p, c) == y);
  }
  for (Variant v : {Variant::structure_only, Variant::structure_only_no_attention}) {
    ModelConfig c = tiny(v);
    ModelParams p = ModelParams::init(c, rng);
    EventFeatures f = random_features(rng, c, 3, "a");
    const double y = eval_one(f, p, c);
    f.content.assign(c.n_max * c.d_w, 7.0);
    CHECK(eval_one(f, p, c) == y);
  }
}

TEST_CASE("parameter counts follow the variant") {
  ModelConfig c = tiny(Variant::full);
  Rng rng(1);
  const std::size_t full = ModelParams::init(c, rng).parameter_count();
  c.variant = Variant::structure_only;
  const std::size_t so = ModelParams::init(c, rng).parameter_count();
  c.variant = Variant::structure_only_no_attention;
  const std::size_t na = ModelParams::init(c, rng).parameter_count();
  c.variant = Variant::content_only;
  const std::size_t co = ModelParams::init(c, rng).parameter_count();
  CHECK(full > so);
  CHECK(full > co);
  // attention adds W_h (2H x A), b_n (A), u_s (A), and its output is A wide
  // instead of 2H: (6*3 + 3 + 3) + (3 - 6) * 4
  CHECK(so - na == 24 - 12);
}

TEST_CASE("dropout is inactive at evaluation and seeded in training") {
  Rng rng(6);
  ModelConfig c = tiny(Variant::full);
  ModelParams p = ModelParams::init(c, rng);
  EventFeatures f = random_features(rng, c, 4, "a");
  const EventFeatures* b[] = {&f};
  Rng r1(9), r2(9), r3(10);
  CHECK(forward(b, p, c, false, r1).y_hat.item() == forward(b, p, c, false, r3).y_hat.item());
  Rng s1(9), s2(9);
  CHECK(forward(b, p, c, true, s1).y_hat.item() == forward(b, p, c, true, s2).y_hat.item());
  (void)r2;
}

TEST_CASE("binary cross-entropy values") {
  const int labels[] = {1, 0};
  const double half[] = {0.5, 0.5};
  CHECK(bce_loss_value(half, labels) == doctest::Approx(2 * std::log(2.0)));
  const double exact[] = {1.0, 0.0};
  CHECK(bce_loss_value(exact, labels) == doctest::Approx(0.0).epsilon(1e-9));
  const double wrong[] = {0.0, 1.0};
  CHECK(std::isfinite(bce_loss_value(wrong, labels)));
  CHECK(bce_loss_value(wrong, labels) == doctest::Approx(-2 * std::log(1e-12)));
  Tensor y = Tensor::column({0.5, 0.5}, true);
  CHECK(bce_loss(y, labels).item() == doctest::Approx(1.3862943611));
}

TEST_CASE("shape and variant mismatches are rejected") {
  Rng rng(7);
  ModelConfig c = tiny(Variant::full);
  ModelParams p = ModelParams::init(c, rng);
  EventFeatures f = random_features(rng, c, 2, "a");
  f.content.pop_back();
  const EventFeatures* b[] = {&f};
  CHECK_THROWS_AS(forward(b, p, c, false, rng), ShapeError);
  ModelConfig other = c;
  other.variant = Variant::content_only;
  f = random_features(rng, other, 2, "a");
  CHECK_THROWS_AS(forward(b, p, other, false, rng), ConfigError);
  c.k = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(variant_from_string(to_string(Variant::structure_only_no_attention)) ==
        Variant::structure_only_no_attention);
  CHECK_THROWS_AS(variant_from_string("both"), ConfigError);
}

TEST_CASE("structure features come from the window partition") {
  Event e = test::event("e", 1, {{"r", "", 0}, {"a", "r", 10}, {"b", "a", 1300}});
  WindowConfig w;
  w.unit_seconds = 1200;
  w.layer_cap = 2;
  EventFeatures f = structure_features(e, w);
  CHECK(f.n_windows == 2);
  CHECK(f.structure.size() == 12);
  CHECK(f.label == 1);
}

TEST_CASE("analytic gradients match finite differences for every variant") {
  for (Variant v : kVariants) {
    CAPTURE(to_string(v));
    auto r = check_model_gradients(v, 11);
    CHECK(r.passed);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-4);
  }
}

}  // TEST_SUITE
