#pragma once

// Neural building blocks of the structure and content networks. All blocks
// operate on batches: a row per event.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nmdps/autodiff.hpp"
#include "nmdps/rng.hpp"

namespace nmdps {

using ad::Tensor;

// A parameter handle with a stable name, used by optimizers and checkpoints.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

enum class CandidateActivation { tanh, sigmoid };
enum class AttendOver { projected, hidden };

std::string to_string(CandidateActivation a);
std::string to_string(AttendOver a);
CandidateActivation candidate_activation_from_string(const std::string& s);
AttendOver attend_over_from_string(const std::string& s);

// Glorot-uniform fan_in x fan_out matrix, trainable.
Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);
// Zero 1 x n bias row, trainable.
Tensor zero_bias(std::size_t n);

// x U + h W + b for each gate. U is d_in x H, W is H x H, biases 1 x H.
struct GruParams {
  Tensor U_z, U_r, U_h;
  Tensor W_z, W_r, W_h;
  Tensor b_z, b_r, b_h;

  static GruParams init(std::size_t input_dim, std::size_t hidden, Rng& rng);
  std::size_t input_dim() const { return U_z.rows(); }
  std::size_t hidden_dim() const { return W_z.rows(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

struct AttentionParams {
  Tensor W_h;  // input_dim x A
  Tensor b_n;  // 1 x A
  Tensor u_s;  // A x 1

  static AttentionParams init(std::size_t input_dim, std::size_t attention, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

// One filter bank per height. filters[i] is (heights[i] * dim) x maps: column
// j is filter j flattened row-major from its heights[i] x dim shape.
struct ContentParams {
  std::vector<std::size_t> heights;
  std::size_t maps = 0;
  std::size_t dim = 0;
  std::vector<Tensor> filters;
  std::vector<Tensor> biases;  // 1 x maps each

  static ContentParams init(const std::vector<std::size_t>& heights, std::size_t maps,
                            std::size_t dim, Rng& rng);
  std::size_t max_height() const;
  std::size_t output_dim(std::size_t k) const { return heights.size() * maps * k; }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

// tanh(raw W + b); raw is B x 3L, W is 3L x d_s.
Tensor embed_substructure(const Tensor& raw, const Tensor& weights, const Tensor& bias);

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

// One GRU step for a batch: x is B x d_in, h_prev is B x H.
Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruParams& params,
                CandidateActivation candidate = CandidateActivation::tanh);

// mask[t][b] is false for padded steps; those rows carry the previous hidden
// state through unchanged. Returns hs[t] = [h_fwd[t] | h_bwd[t]], B x 2H.
std::vector<Tensor> bigru_forward(const std::vector<Tensor>& xs,
                                  const std::vector<std::vector<bool>>& mask,
                                  const GruParams& fwd, const GruParams& bwd,
                                  CandidateActivation candidate = CandidateActivation::tanh);

struct AttentionOutput {
  Tensor pooled;  // B x A (projected) or B x 2H (hidden)
  Tensor alphas;  // B x T, zero at masked steps
};

// u_t = tanh(hs[t] W_h + b_n); alpha = masked softmax(u_t . u_s) over time;
// pooled = sum_t alpha_t u_t (or alpha_t hs[t] when attending over hidden).
AttentionOutput temporal_attention(const std::vector<Tensor>& hs,
                                   const std::vector<std::vector<bool>>& mask,
                                   const AttentionParams& params,
                                   AttendOver over = AttendOver::projected);

// Mean of hs over unmasked steps, the no-attention aggregator.
Tensor mean_pool(const std::vector<Tensor>& hs, const std::vector<std::vector<bool>>& mask);

// x_hat stacks `batch` blocks of n rows (posts) by dim columns. Every filter
// slides down the post axis, then bias, ReLU and order-preserving k-max.
// Returns batch x (heights * maps * k), grouped height-major then filter.
Tensor content_forward(const Tensor& x_hat, std::size_t batch, const ContentParams& params,
                       std::size_t k);

}  // namespace nmdps
