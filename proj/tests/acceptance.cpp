// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nmdps/autodiff.hpp"
#include "nmdps/gradcheck.hpp"
#include "nmdps/model.hpp"
#include "nmdps/netblocks.hpp"
#include "nmdps/structpart.hpp"
#include "nmdps/synthgen.hpp"
#include "nmdps/textrep.hpp"
#include "nmdps/trainer.hpp"
#include "nmdps/wlkernel.hpp"
#include "support.hpp"
#include "wl_oracle.hpp"

using namespace nmdps;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<Event> synth(SynthMode mode, std::size_t n, double onset = 0.0) {
  SynthSpec s;
  s.mode = mode;
  s.n_events = n;
  s.seed = 1;
  s.onset_seconds = onset;
  return generate(s);
}

double cv_accuracy(std::span<const Event> events, Variant v) {
  TrainConfig c = test::compact_config();
  c.variant = v;
  return cross_validate(events, c, 5).report.mean_accuracy();
}

Outcome gradients() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool all = true;
  std::size_t ops = 0;
  for (const auto& p : ad::check_primitives(100, 2024, 1e-5, 1e-4)) {
    all = all && p.passed && p.trials >= 100;
    worst = std::max(worst, p.max_rel_error);
    ++ops;
  }
  o.require(all && worst < 1e-4,
            std::to_string(ops) + " primitives x 100 shapes, max rel err " + fmt("%.2e", worst));
  for (Variant v : {Variant::full, Variant::structure_only, Variant::structure_only_no_attention,
                    Variant::content_only}) {
    auto r = check_model_gradients(v, 7, 1e-5, 1e-3);
    o.require(r.passed && r.max_rel_error < 1e-3,
              to_string(v) + " " + fmt("%.2e", r.max_rel_error));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(secs < 60.0, fmt("%.2f s", secs));
  return o;
}

Outcome layer_math() {
  Outcome o;
  GruParams p;
  auto one = [](bool grad) { return Tensor({1, 1}, {1.0}, grad); };
  p.U_z = p.U_r = p.U_h = p.W_z = p.W_r = p.W_h = one(false);
  p.b_z = p.b_r = p.b_h = Tensor::zeros({1, 1});
  const double h = gru_step(one(false), Tensor::zeros({1, 1}), p).item();
  o.require(std::abs(h - 0.55677) < 1e-5, "gru h=" + fmt("%.6f", h));

  Tensor w = one(true);
  std::vector<NamedTensor> ps{{"w", &w}};
  AdamState st = make_adam(ps, 0.1, 0.9, 0.999, 1e-8);
  ad::backward(ad::mul(w, w));
  adam_step(ps, st);
  o.require(std::abs(w.item() - 0.9) < 1e-6, "adam w=" + fmt("%.7f", w.item()));

  const double y[] = {0.5};
  const int label[] = {1};
  const double loss = bce_loss_value(y, label);
  o.require(std::abs(loss - 0.6931) < 1e-4, "loss=" + fmt("%.6f", loss));
  return o;
}

std::vector<double> all_raw(const WindowedStructure& ws) {
  std::vector<double> out;
  for (std::size_t t = 1; t <= ws.n_windows(); ++t) {
    auto r = raw_feature_vector(ws, t);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

Outcome structure_oracle() {
  Outcome o;
  Event e = test::event("w", 1, {{"root", "", 0}, {"A", "root", 300}, {"B", "A", 1500},
                                 {"C", "root", 1800}});
  WindowConfig c;
  c.unit_seconds = 1200;
  c.layer_cap = 3;
  WindowedStructure ws = featurize(e, c);
  const int n1[] = {1, 0, 0}, n2[] = {1, 1, 0};
  const double p2[] = {0.5, 0.5, 0.0}, r2[] = {0.0, 1.0, 0.0};
  bool table = ws.n_windows() == 2;
  for (std::size_t j = 1; j <= 3; ++j) {
    table = table && ws.count(1, j) == n1[j - 1] && ws.share(1, j) == (j == 1 ? 1.0 : 0.0) &&
            ws.ratio(1, j) == 0.0 && ws.count(2, j) == n2[j - 1] &&
            ws.share(2, j) == p2[j - 1] && ws.ratio(2, j) == r2[j - 1];
  }
  o.require(table, "worked example table");

  Rng rng(99);
  std::size_t shift_ok = 0, scale_ok = 0;
  const std::size_t trials = 100;
  for (std::size_t i = 0; i < trials; ++i) {
    Event a = test::random_event(rng, "r" + std::to_string(i));
    const double shift = static_cast<double>(rng.below(1000000));
    const double scale = static_cast<double>(2 + rng.below(5));
    std::vector<Post> moved = a.posts, stretched = a.posts;
    for (auto& p : moved) p.timestamp += shift;
    for (auto& p : stretched) p.timestamp *= scale;
    Event am = make_event(a.event_id, a.label, moved);
    Event as = make_event(a.event_id, a.label, stretched);
    WindowConfig base;
    base.unit_seconds = 1200;
    base.max_windows = 40;
    WindowConfig scaled = base;
    scaled.unit_seconds *= scale;
    const auto ref = all_raw(featurize(a, base));
    shift_ok += all_raw(featurize(am, base)) == ref;
    scale_ok += all_raw(featurize(as, scaled)) == ref;
  }
  o.require(shift_ok == trials, "translation " + std::to_string(shift_ok) + "/100");
  o.require(scale_ok == trials, "time scaling " + std::to_string(scale_ok) + "/100");
  return o;
}

Outcome overfit() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto events = synth(SynthMode::both, 16);
  TrainConfig c = test::compact_config();
  c.epochs = 200;
  FoldResult r = train_fold(events, events, c);
  double best = std::numeric_limits<double>::infinity();
  std::size_t at = 0;
  for (std::size_t e = 0; e < r.loss_curve.size(); ++e) {
    if (r.loss_curve[e] < best) {
      best = r.loss_curve[e];
      at = e + 1;
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(best < 0.05, "min training loss " + fmt("%.2e", best) + " at epoch " +
                             std::to_string(at));
  o.require(secs < 300.0, fmt("%.1f s", secs));
  return o;
}

Outcome dynamic_vs_static() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto events = synth(SynthMode::dynamic_structure, 200);
  const double dyn = cv_accuracy(events, Variant::structure_only);
  const double wl = wl_nearest_neighbor_cv(events, 5, 1).report.mean_accuracy();
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(dyn >= 0.85, "structure_only " + fmt("%.3f", dyn));
  o.require(wl <= 0.60, "WL 1-NN " + fmt("%.3f", wl));
  o.require(secs < 900.0, fmt("%.1f s", secs));
  return o;
}

Outcome ablation_ordering() {
  Outcome o;
  auto events = synth(SynthMode::both, 300);
  const double full = cv_accuracy(events, Variant::full);
  o.require(true, "full " + fmt("%.3f", full));
  for (Variant v : {Variant::structure_only, Variant::structure_only_no_attention,
                    Variant::content_only}) {
    const double a = cv_accuracy(events, v);
    o.require(full >= a - 0.02, to_string(v) + " " + fmt("%.3f", a));
  }
  return o;
}

Outcome early_detection() {
  Outcome o;
  auto events = synth(SynthMode::dynamic_structure, 200, 3600.0);
  TrainConfig c = test::compact_config();
  c.variant = Variant::structure_only;
  const double dl[] = {1800.0, 7200.0};
  auto pts = early_detection_sweep(events, c, dl, 5);
  const double a05 = pts[0].report.mean_accuracy(), a2 = pts[1].report.mean_accuracy();
  o.require(a2 - a05 >= 0.10, "0.5h " + fmt("%.3f", a05) + ", 2h " + fmt("%.3f", a2));
  return o;
}

Outcome null_control() {
  Outcome o;
  auto events = synth(SynthMode::null, 300);
  for (Variant v : {Variant::full, Variant::structure_only, Variant::structure_only_no_attention,
                    Variant::content_only}) {
    const double a = cv_accuracy(events, v);
    o.require(a >= 0.4 && a <= 0.6, to_string(v) + " " + fmt("%.3f", a));
  }
  return o;
}

LabeledGraph permuted(const Event& e, Rng& rng) {
  std::vector<std::size_t> perm(e.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::string> labels(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    labels[perm[i]] = std::to_string(e.depth[i]);
    if (i > 0) edges.emplace_back(perm[static_cast<std::size_t>(e.parent_index[i])], perm[i]);
  }
  return LabeledGraph(e.size(), edges, labels);
}

Outcome wl_properties() {
  Outcome o;
  Rng rng(5);
  std::size_t self = 0, sym = 0, iso = 0;
  for (int i = 0; i < 100; ++i) {
    Event a = test::random_event(rng, "a"), b = test::random_event(rng, "b");
    LabeledGraph ga = tree_graph(a), gb = tree_graph(b);
    self += normalized_similarity(ga, ga, 3) == 1.0;
    sym += normalized_similarity(ga, gb, 3) == normalized_similarity(gb, ga, 3);
    iso += wl_kernel(ga, gb, 3) == wl_kernel(permuted(a, rng), gb, 3);
  }
  o.require(self == 100, "self-similarity " + std::to_string(self) + "/100");
  o.require(sym == 100, "symmetry " + std::to_string(sym) + "/100");
  o.require(iso == 100, "permutation invariance " + std::to_string(iso) + "/100");

  Event star = test::event("s", 0, {{"r", "", 0}, {"a", "r", 1}, {"b", "r", 2}, {"c", "r", 3}});
  Event path = test::event("p", 0, {{"r", "", 0}, {"a", "r", 1}, {"b", "a", 2}, {"c", "b", 3}});
  bool match = true;
  for (NodeLabeling l : {NodeLabeling::depth, NodeLabeling::uniform}) {
    for (std::size_t h = 0; h <= 3; ++h) {
      const LabeledGraph gs = tree_graph(star, l), gp = tree_graph(path, l);
      match = match && wl_kernel(gs, gp, h) == test::brute_wl_kernel(gs, gp, h);
    }
  }
  const double k_depth = wl_kernel(tree_graph(star), tree_graph(path), 2);
  const double k_unif = wl_kernel(tree_graph(star, NodeLabeling::uniform),
                                  tree_graph(path, NodeLabeling::uniform), 2);
  o.require(match && k_depth == 4.0 && k_unif == 22.0,
            "star vs path " + fmt("%.0f", k_depth) + " (depth), " + fmt("%.0f", k_unif) +
                " (uniform) match the oracle");
  return o;
}

Outcome determinism() {
  Outcome o;
  SynthSpec s;
  s.mode = SynthMode::both;
  s.n_events = 60;
  TrainConfig c = test::compact_config();
  c.epochs = 5;
  auto csv = [&] {
    auto events = generate(s);
    CvResult r = cross_validate(events, c, 5);
    std::ostringstream out;
    write_report_csv(out, to_string(c.variant), r.report);
    write_predictions_csv(out, to_string(c.variant), r.predictions);
    return out.str();
  };
  const std::string a = csv(), b = csv();
  o.require(a == b && !a.empty(), "cv report CSVs identical (" + std::to_string(a.size()) +
                                      " bytes)");

  std::vector<Document> docs;
  for (const auto& e : generate(s)) {
    for (const auto& p : e.posts) docs.emplace_back(post_key(e, p), tokenize(p.text));
  }
  PvDbowConfig pc;
  pc.dim = 16;
  pc.epochs = 5;
  pc.seed = 3;
  PvDbowModel m1 = train_pv_dbow(docs, pc), m2 = train_pv_dbow(docs, pc);
  o.require(m1.documents() == m2.documents() && m1.word_vectors() == m2.word_vectors() &&
                m1.infer(docs[0].second, "k") == m2.infer(docs[0].second, "k"),
            "paragraph vectors bit-identical");
  return o;
}

Outcome attention_invariants() {
  Outcome o;
  Rng rng(11);
  std::size_t sums = 0, zeros = 0, shifts = 0;
  const std::size_t trials = 200;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t B = 1 + rng.below(4), T = 1 + rng.below(8), H = 1 + rng.below(4);
    const std::size_t A = 1 + rng.below(4);
    std::vector<Tensor> hs;
    std::vector<std::vector<bool>> mask(T, std::vector<bool>(B));
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t len = 1 + rng.below(T);
      for (std::size_t t = 0; t < T; ++t) mask[t][b] = t < len;
    }
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> v(B * 2 * H);
      for (double& x : v) x = rng.normal();
      hs.emplace_back(ad::Shape{B, 2 * H}, v);
    }
    AttentionParams p = AttentionParams::init(2 * H, A, rng);
    for (double& x : p.b_n.mutable_values()) x = rng.normal();
    Tensor alphas = temporal_attention(hs, mask, p).alphas;
    bool sum_ok = true, zero_ok = true;
    for (std::size_t b = 0; b < B; ++b) {
      double s = 0;
      for (std::size_t t = 0; t < T; ++t) {
        s += alphas(b, t);
        if (!mask[t][b]) zero_ok = zero_ok && alphas(b, t) == 0.0;
      }
      sum_ok = sum_ok && std::abs(s - 1.0) < 1e-12;
    }
    sums += sum_ok;
    zeros += zero_ok;

    std::vector<double> logits(B * T), moved(B * T);
    std::vector<bool> flat(B * T);
    for (std::size_t b = 0; b < B; ++b) {
      const double c = rng.uniform(-50, 50);
      for (std::size_t t = 0; t < T; ++t) {
        logits[b * T + t] = rng.normal() * 3;
        moved[b * T + t] = logits[b * T + t] + c;
        flat[b * T + t] = mask[t][b];
      }
    }
    Tensor s1 = ad::softmax_masked(Tensor({B, T}, logits), 1, flat);
    Tensor s2 = ad::softmax_masked(Tensor({B, T}, moved), 1, flat);
    bool shift_ok = true;
    for (std::size_t i = 0; i < B * T; ++i) {
      shift_ok = shift_ok && std::abs(s1.values()[i] - s2.values()[i]) < 1e-12;
    }
    shifts += shift_ok;
  }
  o.require(sums == trials, "sums to 1 " + std::to_string(sums) + "/200");
  o.require(zeros == trials, "zero when masked " + std::to_string(zeros) + "/200");
  o.require(shifts == trials, "shift invariance " + std::to_string(shifts) + "/200");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"hand-verified layer math", layer_math},
      {"structure-feature oracle", structure_oracle},
      {"overfit capability", overfit},
      {"dynamic vs static structure", dynamic_vs_static},
      {"ablation ordering", ablation_ordering},
      {"early-detection signal", early_detection},
      {"null-signal control", null_control},
      {"WL kernel properties", wl_properties},
      {"determinism", determinism},
      {"attention invariants", attention_invariants},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2zu %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
