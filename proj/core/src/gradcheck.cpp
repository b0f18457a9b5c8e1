#include "nmdps/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "nmdps/autodiff.hpp"
#include "nmdps/rng.hpp"

namespace nmdps::ad {

namespace {

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.below(hi - lo + 1);
}

Tensor random_leaf(Rng& rng, Shape s, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(s.size());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(s, std::move(v), true);
}

Tensor random_const(Rng& rng, Shape s) {
  std::vector<double> v(s.size());
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return Tensor(s, std::move(v), false);
}

void nudge_from(Tensor& t, double point, double gap) {
  for (double& x : t.mutable_values()) {
    if (std::abs(x - point) < gap) x = point + (x < point ? -gap : gap);
  }
}

// Resamples until all values differ pairwise by at least gap.
void make_distinct(Rng& rng, Tensor& t, double gap) {
  auto v = t.mutable_values();
  for (;;) {
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    bool ok = true;
    for (std::size_t i = 1; i < sorted.size(); ++i) ok = ok && sorted[i] - sorted[i - 1] >= gap;
    if (ok) return;
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
  }
}

// Distinct values within every column of each group block.
void make_distinct_columns(Rng& rng, Tensor& t, std::size_t groups, double gap) {
  const std::size_t P = t.rows() / groups, m = t.cols();
  auto v = t.mutable_values();
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < m; ++j) {
      for (;;) {
        std::vector<double> col;
        for (std::size_t p = 0; p < P; ++p) col.push_back(v[(g * P + p) * m + j]);
        std::sort(col.begin(), col.end());
        bool ok = true;
        for (std::size_t i = 1; i < col.size(); ++i) ok = ok && col[i] - col[i - 1] >= gap;
        if (ok) break;
        for (std::size_t p = 0; p < P; ++p) v[(g * P + p) * m + j] = rng.uniform(-2.0, 2.0);
      }
    }
  }
}

std::vector<bool> random_mask(Rng& rng, Shape s, int axis) {
  std::vector<bool> mask(s.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(0.7);
  // Guarantee one live entry per line.
  const std::size_t lines = axis == 1 ? s.rows : s.cols;
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t len = axis == 1 ? s.cols : s.rows;
    std::size_t p = rng.below(len);
    mask[axis == 1 ? l * s.cols + p : p * s.cols + l] = true;
  }
  return mask;
}

// Weighted sum makes every output element contribute a distinct gradient.
Tensor reduce(const Tensor& out, const Tensor& weights) { return sum(mul(out, weights)); }

struct Trial {
  std::function<Tensor()> f;
  std::vector<Tensor> leaves;
};

using Builder = std::function<Trial(Rng&)>;

Trial unary_trial(Rng& rng, Tensor (*op)(const Tensor&), double lo = -2.0, double hi = 2.0,
                  std::function<void(Tensor&)> prep = {}) {
  Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
  Tensor x = random_leaf(rng, s, lo, hi);
  if (prep) prep(x);
  Tensor w = random_const(rng, s);
  return {[=] { return reduce(op(x), w); }, {x}};
}

std::vector<std::pair<std::string, Builder>> builders() {
  std::vector<std::pair<std::string, Builder>> b;
  b.emplace_back("matmul", [](Rng& rng) {
    std::size_t m = dim(rng, 1, 5), k = dim(rng, 1, 5), n = dim(rng, 1, 5);
    Tensor a = random_leaf(rng, {m, k}), c = random_leaf(rng, {k, n});
    Tensor w = random_const(rng, {m, n});
    return Trial{[=] { return reduce(matmul(a, c), w); }, {a, c}};
  });
  b.emplace_back("add", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor a = random_leaf(rng, s), c = random_leaf(rng, s), w = random_const(rng, s);
    return Trial{[=] { return reduce(add(a, c), w); }, {a, c}};
  });
  b.emplace_back("add_bias_row", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor a = random_leaf(rng, s), c = random_leaf(rng, {1, s.cols});
    Tensor w = random_const(rng, s);
    return Trial{[=] { return reduce(add(a, c), w); }, {a, c}};
  });
  b.emplace_back("sub", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor a = random_leaf(rng, s), c = random_leaf(rng, s), w = random_const(rng, s);
    return Trial{[=] { return reduce(sub(a, c), w); }, {a, c}};
  });
  b.emplace_back("mul", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor a = random_leaf(rng, s), c = random_leaf(rng, s), w = random_const(rng, s);
    return Trial{[=] { return reduce(mul(a, c), w); }, {a, c}};
  });
  b.emplace_back("affine", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor a = random_leaf(rng, s), w = random_const(rng, s);
    double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
    return Trial{[=] { return reduce(affine(a, alpha, beta), w); }, {a}};
  });
  b.emplace_back("sigmoid", [](Rng& rng) { return unary_trial(rng, sigmoid); });
  b.emplace_back("tanh", [](Rng& rng) { return unary_trial(rng, tanh); });
  b.emplace_back("relu", [](Rng& rng) {
    return unary_trial(rng, relu, -2, 2, [](Tensor& x) { nudge_from(x, 0.0, 1e-3); });
  });
  b.emplace_back("exp", [](Rng& rng) { return unary_trial(rng, exp); });
  b.emplace_back("log", [](Rng& rng) { return unary_trial(rng, log, 0.1, 2.0); });
  b.emplace_back("clamp", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor x = random_leaf(rng, s);
    nudge_from(x, -1.0, 1e-3);
    nudge_from(x, 1.0, 1e-3);
    Tensor w = random_const(rng, s);
    return Trial{[=] { return reduce(clamp(x, -1.0, 1.0), w); }, {x}};
  });
  for (int axis : {0, 1}) {
    b.emplace_back(axis == 0 ? "softmax_masked_axis0" : "softmax_masked_axis1",
                   [axis](Rng& rng) {
                     Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
                     Tensor x = random_leaf(rng, s), w = random_const(rng, s);
                     auto mask = random_mask(rng, s, axis);
                     return Trial{[=] { return reduce(softmax_masked(x, axis, mask), w); }, {x}};
                   });
    b.emplace_back(axis == 0 ? "concat_axis0" : "concat_axis1", [axis](Rng& rng) {
      std::size_t shared = dim(rng, 1, 4);
      std::vector<Tensor> parts;
      std::size_t total = 0;
      for (std::size_t i = 0, n = dim(rng, 1, 3); i < n; ++i) {
        std::size_t e = dim(rng, 1, 4);
        total += e;
        parts.push_back(random_leaf(rng, axis == 0 ? Shape{e, shared} : Shape{shared, e}));
      }
      Tensor w = random_const(rng, axis == 0 ? Shape{total, shared} : Shape{shared, total});
      return Trial{[=] { return reduce(concat(parts, axis), w); }, parts};
    });
    b.emplace_back(axis == 0 ? "slice_axis0" : "slice_axis1", [axis](Rng& rng) {
      Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
      std::size_t limit = axis == 0 ? s.rows : s.cols;
      std::size_t begin = rng.below(limit);
      std::size_t end = begin + 1 + rng.below(limit - begin);
      Tensor x = random_leaf(rng, s);
      Shape o = axis == 0 ? Shape{end - begin, s.cols} : Shape{s.rows, end - begin};
      Tensor w = random_const(rng, o);
      return Trial{[=] { return reduce(slice(x, axis, begin, end), w); }, {x}};
    });
  }
  b.emplace_back("sum", [](Rng& rng) {
    Tensor x = random_leaf(rng, {dim(rng, 1, 5), dim(rng, 1, 5)});
    return Trial{[=] { return mul(sum(x), sum(x)); }, {x}};
  });
  b.emplace_back("mean", [](Rng& rng) {
    Tensor x = random_leaf(rng, {dim(rng, 1, 5), dim(rng, 1, 5)});
    return Trial{[=] { return mul(mean(x), mean(x)); }, {x}};
  });
  b.emplace_back("scale_rows", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor x = random_leaf(rng, s), c = random_leaf(rng, {s.rows, 1});
    Tensor w = random_const(rng, s);
    return Trial{[=] { return reduce(scale_rows(x, c), w); }, {x, c}};
  });
  b.emplace_back("select_rows", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor x = random_leaf(rng, s), y = random_leaf(rng, s), w = random_const(rng, s);
    std::vector<bool> take(s.rows);
    for (std::size_t r = 0; r < s.rows; ++r) take[r] = rng.bernoulli(0.5);
    return Trial{[=] { return reduce(select_rows(take, x, y), w); }, {x, y}};
  });
  b.emplace_back("dropout", [](Rng& rng) {
    Shape s{dim(rng, 1, 5), dim(rng, 1, 5)};
    Tensor x = random_leaf(rng, s), w = random_const(rng, s);
    double rate = rng.uniform(0.0, 0.9);
    std::uint64_t seed = rng.next();
    return Trial{[=] {
                   Rng local(seed);
                   return reduce(dropout(x, rate, true, local), w);
                 },
                 {x}};
  });
  b.emplace_back("conv1d_valid", [](Rng& rng) {
    std::size_t d = dim(rng, 1, 4), h = dim(rng, 1, 4), n = h + rng.below(5);
    Tensor x = random_leaf(rng, {n, d}), k = random_leaf(rng, {h, d});
    Tensor w = random_const(rng, {n - h + 1, 1});
    return Trial{[=] { return reduce(conv1d_valid(x, k), w); }, {x, k}};
  });
  b.emplace_back("kmax_pool", [](Rng& rng) {
    std::size_t n = dim(rng, 1, 8), k = dim(rng, 1, n);
    bool as_row = rng.bernoulli(0.5);
    Tensor x = random_leaf(rng, as_row ? Shape{1, n} : Shape{n, 1});
    make_distinct(rng, x, 1e-3);
    Tensor w = random_const(rng, as_row ? Shape{1, k} : Shape{k, 1});
    return Trial{[=] { return reduce(kmax_pool(x, k), w); }, {x}};
  });
  b.emplace_back("unfold", [](Rng& rng) {
    std::size_t g = dim(rng, 1, 3), h = dim(rng, 1, 3), n = h + rng.below(4), d = dim(rng, 1, 3);
    Tensor x = random_leaf(rng, {g * n, d});
    Tensor w = random_const(rng, {g * (n - h + 1), h * d});
    return Trial{[=] { return reduce(unfold(x, g, h), w); }, {x}};
  });
  b.emplace_back("kmax_pool_grouped", [](Rng& rng) {
    std::size_t g = dim(rng, 1, 3), P = dim(rng, 1, 6), m = dim(rng, 1, 3), k = dim(rng, 1, P);
    Tensor x = random_leaf(rng, {g * P, m});
    make_distinct_columns(rng, x, g, 1e-3);
    Tensor w = random_const(rng, {g, m * k});
    return Trial{[=] { return reduce(kmax_pool_grouped(x, g, k), w); }, {x}};
  });
  return b;
}

}  // namespace

std::vector<PrimitiveCheck> check_primitives(std::size_t trials, std::uint64_t seed,
                                             double epsilon, double tolerance) {
  std::vector<PrimitiveCheck> out;
  std::uint64_t stream = 0;
  for (auto& [name, build] : builders()) {
    Rng rng(Rng::derive(seed, stream++));
    PrimitiveCheck check{name, 0, 0.0, true};
    for (std::size_t t = 0; t < trials; ++t) {
      Trial trial = build(rng);
      GradCheckReport r = grad_check(trial.f, trial.leaves, epsilon, tolerance);
      ++check.trials;
      check.max_rel_error = std::max(check.max_rel_error, r.max_rel_error);
      check.passed = check.passed && r.passed;
    }
    out.push_back(check);
  }
  return out;
}

}  // namespace nmdps::ad
