#include "nmdps/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_set>

#include "nmdps/error.hpp"

namespace nmdps::ad {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;

std::string Shape::str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ShapeError("Tensor: " + std::to_string(values.size()) +
                     " values for shape " + shape.str());
  }
  node_ = std::make_shared<Node>();
  node_->shape = shape;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape.size(), 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value) {
  return Tensor(shape, std::vector<double>(shape.size(), value));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1, 1}, {value}, requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  Shape s{1, values.size()};
  return Tensor(s, std::move(values), requires_grad);
}

Tensor Tensor::column(std::vector<double> values, bool requires_grad) {
  Shape s{values.size(), 1};
  return Tensor(s, std::move(values), requires_grad);
}

namespace {

const Node& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw Error("use of an undefined Tensor");
  return *n;
}

}  // namespace

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::span<const double> Tensor::values() const { return checked(node_).value; }
std::span<double> Tensor::mutable_values() {
  checked(node_);
  return node_->value;
}
double Tensor::operator()(std::size_t r, std::size_t c) const {
  const Node& n = checked(node_);
  if (r >= n.shape.rows || c >= n.shape.cols) throw ShapeError("Tensor index out of range");
  return n.value[r * n.shape.cols + c];
}
double Tensor::item() const {
  const Node& n = checked(node_);
  if (n.value.size() != 1) throw ShapeError("item() on tensor of shape " + n.shape.str());
  return n.value[0];
}
std::vector<double> Tensor::to_vector() const { return checked(node_).value; }
bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
std::span<const double> Tensor::grad() const { return checked(node_).grad; }
std::span<double> Tensor::mutable_grad() {
  checked(node_);
  return node_->ensure_grad();
}
void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}
Tensor Tensor::detach(bool requires_grad) const {
  return Tensor(shape(), to_vector(), requires_grad);
}

// ---- graph plumbing -------------------------------------------------------

namespace {

using Backward = std::function<void(Node&)>;

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents, Backward fn) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->leaf = false;
  bool rg = std::any_of(parents.begin(), parents.end(),
                        [](const auto& p) { return p->requires_grad; });
  if (rg) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

// Parent gradient buffer, or nullptr when that parent needs none.
std::vector<double>* pgrad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

const std::vector<double>& pval(Node& self, std::size_t i) {
  return self.parents[i]->value;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F forward, D derivative) {
  const auto& x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  return make_result(a.shape(), std::move(out), {a.node_ptr()},
                     [derivative](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       const auto& x = pval(self, 0);
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         (*g)[i] += self.grad[i] * derivative(x[i], self.value[i]);
                       }
                     });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + loss.shape().str());
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;
  if (root->leaf) {
    root->ensure_grad()[0] += 1.0;
    return;
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !p->leaf && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: shape mismatch " + a.shape().str() + " x " + b.shape().str());
  }
  const auto& A = a.values();
  const auto& B = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* br = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return make_result({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                     [m, k, n](Node& self) {
                       const auto& A = pval(self, 0);
                       const auto& B = pval(self, 1);
                       const auto& G = self.grad;
                       if (auto* ga = pgrad(self, 0)) {
                         // dA = G * B^T
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* g = G.data() + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double* br = B.data() + p * n;
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += g[j] * br[j];
                             (*ga)[i * k + p] += s;
                           }
                         }
                       }
                       if (auto* gb = pgrad(self, 1)) {
                         // dB = A^T * G
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* g = G.data() + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = A[i * k + p];
                             if (av == 0.0) continue;
                             double* o = gb->data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) o[j] += av * g[j];
                           }
                         }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bias = a.shape() != b.shape();
  if (bias && !(b.rows() == 1 && b.cols() == a.cols())) {
    throw ShapeError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  const auto& A = a.values();
  const auto& B = b.values();
  const std::size_t cols = a.cols();
  std::vector<double> out(A.begin(), A.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[bias ? i % cols : i];
  return make_result(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [bias, cols](Node& self) {
                       const auto& G = self.grad;
                       if (auto* ga = pgrad(self, 0)) {
                         for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i];
                       }
                       if (auto* gb = pgrad(self, 1)) {
                         for (std::size_t i = 0; i < G.size(); ++i) {
                           (*gb)[bias ? i % cols : i] += G[i];
                         }
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  const auto& A = a.values();
  const auto& B = b.values();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return make_result(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [](Node& self) {
                       const auto& G = self.grad;
                       if (auto* ga = pgrad(self, 0)) {
                         for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i];
                       }
                       if (auto* gb = pgrad(self, 1)) {
                         for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i] -= G[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  const auto& A = a.values();
  const auto& B = b.values();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [](Node& self) {
                       const auto& G = self.grad;
                       const auto& A = pval(self, 0);
                       const auto& B = pval(self, 1);
                       if (auto* ga = pgrad(self, 0)) {
                         for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i] * B[i];
                       }
                       if (auto* gb = pgrad(self, 1)) {
                         for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i] += G[i] * A[i];
                       }
                     });
}

Tensor affine(const Tensor& a, double alpha, double beta) {
  return unary(
      a, [=](double x) { return alpha * x + beta; },
      [=](double, double) { return alpha; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw Error("log: non-positive input " + std::to_string(x));
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [=](double x) { return std::clamp(x, lo, hi); },
      [=](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor softmax_masked(const Tensor& a, int axis, const std::vector<bool>& mask) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax_masked: axis must be 0 or 1");
  if (mask.size() != a.size()) {
    throw ShapeError("softmax_masked: mask has " + std::to_string(mask.size()) +
                     " entries for shape " + a.shape().str());
  }
  const std::size_t R = a.rows(), C = a.cols();
  const std::size_t lines = axis == 1 ? R : C;
  const std::size_t len = axis == 1 ? C : R;
  // Element (line, pos) lives at idx(line, pos).
  auto idx = [=](std::size_t line, std::size_t pos) {
    return axis == 1 ? line * C + pos : pos * C + line;
  };
  const auto& X = a.values();
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t l = 0; l < lines; ++l) {
    double mx = -INFINITY;
    for (std::size_t p = 0; p < len; ++p) {
      if (mask[idx(l, p)]) mx = std::max(mx, X[idx(l, p)]);
    }
    if (mx == -INFINITY) {
      throw Error("softmax_masked: all positions masked in line " + std::to_string(l));
    }
    double z = 0.0;
    for (std::size_t p = 0; p < len; ++p) {
      if (!mask[idx(l, p)]) continue;
      double e = std::exp(X[idx(l, p)] - mx);
      out[idx(l, p)] = e;
      z += e;
    }
    for (std::size_t p = 0; p < len; ++p) out[idx(l, p)] /= z;
  }
  return make_result(a.shape(), std::move(out), {a.node_ptr()},
                     [=](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       const auto& Y = self.value;
                       const auto& G = self.grad;
                       for (std::size_t l = 0; l < lines; ++l) {
                         double dot = 0.0;
                         for (std::size_t p = 0; p < len; ++p) dot += Y[idx(l, p)] * G[idx(l, p)];
                         for (std::size_t p = 0; p < len; ++p) {
                           const std::size_t i = idx(l, p);
                           (*g)[i] += Y[i] * (G[i] - dot);
                         }
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<std::size_t> extent;
  const Shape first = parts.front().shape();
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    const Shape s = t.shape();
    if ((axis == 0 && s.cols != first.cols) || (axis == 1 && s.rows != first.rows)) {
      throw ShapeError("concat: shape mismatch " + first.str() + " vs " + s.str());
    }
    extent.push_back(axis == 0 ? s.rows : s.cols);
    total += extent.back();
    parents.push_back(t.node_ptr());
  }
  const Shape out_shape = axis == 0 ? Shape{total, first.cols} : Shape{first.rows, total};
  std::vector<double> out;
  out.reserve(out_shape.size());
  if (axis == 0) {
    for (const Tensor& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
  } else {
    for (std::size_t r = 0; r < first.rows; ++r) {
      for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& v = parts[k].values();
        out.insert(out.end(), v.begin() + r * extent[k], v.begin() + (r + 1) * extent[k]);
      }
    }
  }
  const std::size_t rows = first.rows;
  return make_result(out_shape, std::move(out), std::move(parents),
                     [axis, extent, total, rows](Node& self) {
                       const auto& G = self.grad;
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < extent.size(); ++k) {
                         auto* g = pgrad(self, k);
                         if (g) {
                           if (axis == 0) {
                             const std::size_t cols = self.shape.cols;
                             for (std::size_t i = 0; i < extent[k] * cols; ++i) {
                               (*g)[i] += G[offset * cols + i];
                             }
                           } else {
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < extent[k]; ++c) {
                                 (*g)[r * extent[k] + c] += G[r * total + offset + c];
                               }
                             }
                           }
                         }
                         offset += extent[k];
                       }
                     });
}

Tensor slice(const Tensor& a, int axis, std::size_t begin, std::size_t end) {
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const Shape s = a.shape();
  const std::size_t limit = axis == 0 ? s.rows : s.cols;
  if (begin >= end || end > limit) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + s.str());
  }
  const Shape out_shape = axis == 0 ? Shape{end - begin, s.cols} : Shape{s.rows, end - begin};
  const auto& X = a.values();
  std::vector<double> out;
  out.reserve(out_shape.size());
  for (std::size_t r = 0; r < out_shape.rows; ++r) {
    for (std::size_t c = 0; c < out_shape.cols; ++c) {
      out.push_back(axis == 0 ? X[(begin + r) * s.cols + c] : X[r * s.cols + begin + c]);
    }
  }
  return make_result(out_shape, std::move(out), {a.node_ptr()},
                     [=](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       for (std::size_t r = 0; r < out_shape.rows; ++r) {
                         for (std::size_t c = 0; c < out_shape.cols; ++c) {
                           const std::size_t src =
                               axis == 0 ? (begin + r) * s.cols + c : r * s.cols + begin + c;
                           (*g)[src] += self.grad[r * out_shape.cols + c];
                         }
                       }
                     });
}

Tensor sum(const Tensor& a) {
  const auto& X = a.values();
  double s = std::accumulate(X.begin(), X.end(), 0.0);
  return make_result({1, 1}, {s}, {a.node_ptr()}, [](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    for (double& v : *g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  return affine(sum(a), 1.0 / n, 0.0);
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  if (s.rows() != a.rows() || s.cols() != 1) {
    throw ShapeError("scale_rows: scale " + s.shape().str() + " does not match " +
                     a.shape().str());
  }
  const std::size_t R = a.rows(), C = a.cols();
  const auto& X = a.values();
  const auto& S = s.values();
  std::vector<double> out(X.size());
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = S[r] * X[r * C + c];
  }
  return make_result(a.shape(), std::move(out), {a.node_ptr(), s.node_ptr()},
                     [R, C](Node& self) {
                       const auto& X = pval(self, 0);
                       const auto& S = pval(self, 1);
                       const auto& G = self.grad;
                       auto* ga = pgrad(self, 0);
                       auto* gs = pgrad(self, 1);
                       for (std::size_t r = 0; r < R; ++r) {
                         double acc = 0.0;
                         for (std::size_t c = 0; c < C; ++c) {
                           const std::size_t i = r * C + c;
                           if (ga) (*ga)[i] += S[r] * G[i];
                           acc += G[i] * X[i];
                         }
                         if (gs) (*gs)[r] += acc;
                       }
                     });
}

Tensor select_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b) {
  require_same(a, b, "select_rows");
  if (take_a.size() != a.rows()) {
    throw ShapeError("select_rows: " + std::to_string(take_a.size()) + " flags for " +
                     std::to_string(a.rows()) + " rows");
  }
  const std::size_t C = a.cols();
  const auto& A = a.values();
  const auto& B = b.values();
  std::vector<double> out(A.size());
  for (std::size_t r = 0; r < take_a.size(); ++r) {
    const auto& src = take_a[r] ? A : B;
    std::copy(src.begin() + r * C, src.begin() + (r + 1) * C, out.begin() + r * C);
  }
  return make_result(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                     [take_a, C](Node& self) {
                       auto* ga = pgrad(self, 0);
                       auto* gb = pgrad(self, 1);
                       for (std::size_t r = 0; r < take_a.size(); ++r) {
                         auto* g = take_a[r] ? ga : gb;
                         if (!g) continue;
                         for (std::size_t c = 0; c < C; ++c) (*g)[r * C + c] += self.grad[r * C + c];
                       }
                     });
}

Tensor dropout(const Tensor& a, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> m(a.size());
  for (double& v : m) v = rng.bernoulli(rate) ? 0.0 : keep_scale;
  const auto& X = a.values();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] * m[i];
  return make_result(a.shape(), std::move(out), {a.node_ptr()},
                     [m = std::move(m)](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < m.size(); ++i) (*g)[i] += self.grad[i] * m[i];
                     });
}

Tensor conv1d_valid(const Tensor& input, const Tensor& filter) {
  const std::size_t n = input.rows(), d = input.cols(), h = filter.rows();
  if (filter.cols() != d) {
    throw ShapeError("conv1d_valid: input " + input.shape().str() + " vs filter " +
                     filter.shape().str());
  }
  if (h > n) {
    throw ShapeError("conv1d_valid: filter height " + std::to_string(h) +
                     " exceeds input length " + std::to_string(n));
  }
  const std::size_t m = n - h + 1;
  const auto& X = input.values();
  const auto& W = filter.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t q = 0; q < h * d; ++q) s += X[i * d + q] * W[q];
    out[i] = s;
  }
  return make_result({m, 1}, std::move(out), {input.node_ptr(), filter.node_ptr()},
                     [m, h, d](Node& self) {
                       const auto& X = pval(self, 0);
                       const auto& W = pval(self, 1);
                       auto* gx = pgrad(self, 0);
                       auto* gw = pgrad(self, 1);
                       for (std::size_t i = 0; i < m; ++i) {
                         const double g = self.grad[i];
                         for (std::size_t q = 0; q < h * d; ++q) {
                           if (gx) (*gx)[i * d + q] += g * W[q];
                           if (gw) (*gw)[q] += g * X[i * d + q];
                         }
                       }
                     });
}

std::vector<std::size_t> kmax_indices(std::span<const double> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw ShapeError("kmax_pool: k=" + std::to_string(k) + " out of range for length " +
                     std::to_string(values.size()));
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensor kmax_pool(const Tensor& v, std::size_t k) {
  if (v.rows() != 1 && v.cols() != 1) {
    throw ShapeError("kmax_pool: expected a vector, got " + v.shape().str());
  }
  auto idx = kmax_indices(v.values(), k);
  std::vector<double> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(v.values()[i]);
  const Shape s = v.rows() == 1 ? Shape{1, k} : Shape{k, 1};
  return make_result(s, std::move(out), {v.node_ptr()}, [idx](Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    for (std::size_t q = 0; q < idx.size(); ++q) (*g)[idx[q]] += self.grad[q];
  });
}

Tensor unfold(const Tensor& a, std::size_t groups, std::size_t height) {
  if (groups == 0 || a.rows() % groups != 0) {
    throw ShapeError("unfold: " + std::to_string(a.rows()) + " rows not divisible into " +
                     std::to_string(groups) + " groups");
  }
  const std::size_t n = a.rows() / groups, d = a.cols();
  if (height == 0 || height > n) {
    throw ShapeError("unfold: window height " + std::to_string(height) +
                     " exceeds block length " + std::to_string(n));
  }
  const std::size_t windows = n - height + 1;
  const std::size_t width = height * d;
  const auto& X = a.values();
  std::vector<double> out(groups * windows * width);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t i = 0; i < windows; ++i) {
      const double* src = X.data() + (g * n + i) * d;
      std::copy(src, src + width, out.begin() + (g * windows + i) * width);
    }
  }
  return make_result({groups * windows, width}, std::move(out), {a.node_ptr()},
                     [=](Node& self) {
                       auto* gx = pgrad(self, 0);
                       if (!gx) return;
                       for (std::size_t g = 0; g < groups; ++g) {
                         for (std::size_t i = 0; i < windows; ++i) {
                           const double* src = self.grad.data() + (g * windows + i) * width;
                           double* dst = gx->data() + (g * n + i) * d;
                           for (std::size_t q = 0; q < width; ++q) dst[q] += src[q];
                         }
                       }
                     });
}

Tensor kmax_pool_grouped(const Tensor& a, std::size_t groups, std::size_t k) {
  if (groups == 0 || a.rows() % groups != 0) {
    throw ShapeError("kmax_pool_grouped: " + std::to_string(a.rows()) +
                     " rows not divisible into " + std::to_string(groups) + " groups");
  }
  const std::size_t P = a.rows() / groups, m = a.cols();
  if (k == 0 || k > P) {
    throw ShapeError("kmax_pool: k=" + std::to_string(k) + " out of range for length " +
                     std::to_string(P));
  }
  const auto& X = a.values();
  std::vector<std::size_t> src(groups * m * k);
  std::vector<double> out(groups * m * k);
  std::vector<double> column(P);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t p = 0; p < P; ++p) column[p] = X[(g * P + p) * m + j];
      auto idx = kmax_indices(column, k);
      for (std::size_t q = 0; q < k; ++q) {
        const std::size_t o = g * m * k + j * k + q;
        src[o] = (g * P + idx[q]) * m + j;
        out[o] = X[src[o]];
      }
    }
  }
  return make_result({groups, m * k}, std::move(out), {a.node_ptr()},
                     [src = std::move(src)](Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       for (std::size_t o = 0; o < src.size(); ++o) (*g)[src[o]] += self.grad[o];
                     });
}

// ---- gradient checking ----------------------------------------------------

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const Tensor> leaves,
                           double epsilon, double tolerance) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    throw Error("grad_check: epsilon must be in (0, 1e-2]");
  }
  std::vector<Tensor> params(leaves.begin(), leaves.end());
  for (Tensor& p : params) {
    if (!p.requires_grad()) throw Error("grad_check: leaf does not require grad");
    p.zero_grad();
  }
  Tensor loss = f();
  const double base = loss.item();
  const double again = f().item();
  if (std::memcmp(&base, &again, sizeof(double)) != 0) {
    throw Error("grad_check: function is non-deterministic (forward passes disagree)");
  }
  backward(loss);

  GradCheckReport report;
  for (std::size_t li = 0; li < params.size(); ++li) {
    Tensor& p = params[li];
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) analytic.assign(p.grad().begin(), p.grad().end());
    auto vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + epsilon;
      const double up = f().item();
      vals[i] = saved - epsilon;
      const double down = f().item();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = relative_error(analytic[i], numeric);
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, err);
      if (!(err < tolerance)) {
        report.failures.push_back({li, i, analytic[i], numeric, err});
      }
    }
  }
  report.passed = report.failures.empty();
  return report;
}

}  // namespace nmdps::ad
