#pragma once

// Dense float64 reverse-mode automatic differentiation.
//
// Tensors are 2-D (rows x cols); vectors are 1 x n rows or n x 1 columns.
// The graph is built while ops run and is released when the last handle to
// its output goes away. Leaves created with requires_grad accumulate
// gradients across backward() calls until zero_grad().

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nmdps/rng.hpp"

namespace nmdps::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor column(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t size() const { return shape().size(); }

  std::span<const double> values() const;
  // Writable storage; intended for leaves (parameters, inputs).
  std::span<double> mutable_values();
  double operator()(std::size_t r, std::size_t c) const;
  double item() const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  bool has_grad() const;
  // Gradient storage; empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Copy of the values as a new leaf outside any graph.
  Tensor detach(bool requires_grad = false) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Populates gradients of every requires_grad leaf reachable from loss.
// loss must be 1 x 1. Constant losses are a no-op.
void backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// Same shapes, or b a 1 x cols bias row added to every row of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// alpha * a + beta
Tensor affine(const Tensor& a, double alpha, double beta);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
// Gradient passes only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// Softmax along axis (0: down each column, 1: across each row) over entries
// whose mask is true; masked entries are exactly 0. mask is row-major with
// one flag per element. Every line must keep at least one entry.
Tensor softmax_masked(const Tensor& a, int axis, const std::vector<bool>& mask);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t begin, std::size_t end);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// out[r, :] = s[r] * a[r, :] with s a rows x 1 column.
Tensor scale_rows(const Tensor& a, const Tensor& s);
// Row r of the result is row r of a when take_a[r], else row r of b.
Tensor select_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b);

// Inverted dropout. Identity (the same tensor) when !train or rate == 0.
Tensor dropout(const Tensor& a, double rate, bool train, Rng& rng);

// Valid 1-D convolution of an n x d input by an h x d filter along rows:
// out[i] = <filter, input[i .. i+h-1, :]>_F. Result is (n-h+1) x 1.
Tensor conv1d_valid(const Tensor& input, const Tensor& filter);

// k largest entries of a vector in their original order; ties go to the
// earlier index. Keeps the orientation (row or column) of the input.
Tensor kmax_pool(const Tensor& v, std::size_t k);

// Batched helpers used by the content network. The input stacks `groups`
// blocks of equal height.
//
// unfold: each block of n rows becomes n-h+1 rows holding h consecutive
// input rows concatenated, so conv1d over a block is unfold then matmul.
Tensor unfold(const Tensor& a, std::size_t groups, std::size_t height);
// kmax_pool_grouped: for each block and column, order-preserving k-max;
// row g of the result is [col 0 top-k | col 1 top-k | ...].
Tensor kmax_pool_grouped(const Tensor& a, std::size_t groups, std::size_t k);

// Indices chosen by kmax_pool for a plain value list.
std::vector<std::size_t> kmax_indices(std::span<const double> values, std::size_t k);

// ---- gradient checking ----------------------------------------------------

struct GradCheckFailure {
  std::size_t leaf = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::vector<GradCheckFailure> failures;
  bool passed = true;
};

// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

// Compares backward() of f against central differences for every element of
// every leaf. f must rebuild its graph on each call and be deterministic;
// two disagreeing forward passes raise nmdps::Error.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           std::span<const Tensor> leaves, double epsilon,
                           double tolerance);

}  // namespace nmdps::ad
