#include "nmdps/netblocks.hpp"

#include <algorithm>
#include <cmath>

#include "nmdps/error.hpp"

namespace nmdps {

namespace ad_ops = nmdps::ad;

std::string to_string(CandidateActivation a) {
  return a == CandidateActivation::tanh ? "tanh" : "sigmoid";
}

std::string to_string(AttendOver a) {
  return a == AttendOver::projected ? "projected" : "hidden";
}

CandidateActivation candidate_activation_from_string(const std::string& s) {
  if (s == "tanh") return CandidateActivation::tanh;
  if (s == "sigmoid") return CandidateActivation::sigmoid;
  throw ConfigError("unknown candidate_nl '" + s + "' (expected tanh or sigmoid)");
}

AttendOver attend_over_from_string(const std::string& s) {
  if (s == "projected") return AttendOver::projected;
  if (s == "hidden") return AttendOver::hidden;
  throw ConfigError("unknown attend_over '" + s + "' (expected projected or hidden)");
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor({fan_in, fan_out}, std::move(v), true);
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({1, n}, true); }

GruParams GruParams::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  GruParams p;
  p.U_z = glorot(input_dim, hidden, rng);
  p.U_r = glorot(input_dim, hidden, rng);
  p.U_h = glorot(input_dim, hidden, rng);
  p.W_z = glorot(hidden, hidden, rng);
  p.W_r = glorot(hidden, hidden, rng);
  p.W_h = glorot(hidden, hidden, rng);
  p.b_z = zero_bias(hidden);
  p.b_r = zero_bias(hidden);
  p.b_h = zero_bias(hidden);
  return p;
}

void GruParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".U_z", &U_z});
  out.push_back({prefix + ".U_r", &U_r});
  out.push_back({prefix + ".U_h", &U_h});
  out.push_back({prefix + ".W_z", &W_z});
  out.push_back({prefix + ".W_r", &W_r});
  out.push_back({prefix + ".W_h", &W_h});
  out.push_back({prefix + ".b_z", &b_z});
  out.push_back({prefix + ".b_r", &b_r});
  out.push_back({prefix + ".b_h", &b_h});
}

AttentionParams AttentionParams::init(std::size_t input_dim, std::size_t attention, Rng& rng) {
  AttentionParams p;
  p.W_h = glorot(input_dim, attention, rng);
  p.b_n = zero_bias(attention);
  p.u_s = glorot(attention, 1, rng);
  return p;
}

void AttentionParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".W_h", &W_h});
  out.push_back({prefix + ".b_n", &b_n});
  out.push_back({prefix + ".u_s", &u_s});
}

ContentParams ContentParams::init(const std::vector<std::size_t>& heights, std::size_t maps,
                                  std::size_t dim, Rng& rng) {
  ContentParams p;
  p.heights = heights;
  p.maps = maps;
  p.dim = dim;
  for (std::size_t h : heights) {
    p.filters.push_back(glorot(h * dim, maps, rng));
    p.biases.push_back(zero_bias(maps));
  }
  return p;
}

std::size_t ContentParams::max_height() const {
  return heights.empty() ? 0 : *std::max_element(heights.begin(), heights.end());
}

void ContentParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  for (std::size_t i = 0; i < heights.size(); ++i) {
    const std::string h = std::to_string(heights[i]);
    out.push_back({prefix + ".filter_h" + h, &filters[i]});
    out.push_back({prefix + ".bias_h" + h, &biases[i]});
  }
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  return ad_ops::add(ad_ops::matmul(x, weights), bias);
}

Tensor embed_substructure(const Tensor& raw, const Tensor& weights, const Tensor& bias) {
  return ad_ops::tanh(dense(raw, weights, bias));
}

Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruParams& p,
                CandidateActivation candidate) {
  using namespace nmdps::ad;
  Tensor z = sigmoid(add(add(matmul(x, p.U_z), matmul(h_prev, p.W_z)), p.b_z));
  Tensor r = sigmoid(add(add(matmul(x, p.U_r), matmul(h_prev, p.W_r)), p.b_r));
  Tensor pre = add(add(matmul(x, p.U_h), matmul(mul(r, h_prev), p.W_h)), p.b_h);
  Tensor c = candidate == CandidateActivation::tanh ? tanh(pre) : sigmoid(pre);
  return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, c));
}

namespace {

void check_sequence(const std::vector<Tensor>& xs, const std::vector<std::vector<bool>>& mask,
                    const char* op) {
  if (xs.empty()) throw Error(std::string(op) + ": empty sequence");
  if (mask.size() != xs.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(mask.size()) + " mask steps for " +
                     std::to_string(xs.size()) + " inputs");
  }
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (mask[t].size() != xs[t].rows()) {
      throw ShapeError(std::string(op) + ": mask width does not match batch at step " +
                       std::to_string(t));
    }
  }
}

bool all_true(const std::vector<bool>& v) {
  return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
}

}  // namespace

std::vector<Tensor> bigru_forward(const std::vector<Tensor>& xs,
                                  const std::vector<std::vector<bool>>& mask,
                                  const GruParams& fwd, const GruParams& bwd,
                                  CandidateActivation candidate) {
  check_sequence(xs, mask, "bigru_forward");
  const std::size_t T = xs.size(), B = xs.front().rows();
  std::vector<Tensor> hf(T), hb(T);

  Tensor h = Tensor::zeros({B, fwd.hidden_dim()});
  for (std::size_t t = 0; t < T; ++t) {
    Tensor next = gru_step(xs[t], h, fwd, candidate);
    h = all_true(mask[t]) ? next : ad::select_rows(mask[t], next, h);
    hf[t] = h;
  }
  h = Tensor::zeros({B, bwd.hidden_dim()});
  for (std::size_t t = T; t-- > 0;) {
    Tensor next = gru_step(xs[t], h, bwd, candidate);
    h = all_true(mask[t]) ? next : ad::select_rows(mask[t], next, h);
    hb[t] = h;
  }
  std::vector<Tensor> hs(T);
  for (std::size_t t = 0; t < T; ++t) hs[t] = ad::concat({hf[t], hb[t]}, 1);
  return hs;
}

AttentionOutput temporal_attention(const std::vector<Tensor>& hs,
                                   const std::vector<std::vector<bool>>& mask,
                                   const AttentionParams& params, AttendOver over) {
  using namespace nmdps::ad;
  check_sequence(hs, mask, "temporal_attention");
  const std::size_t T = hs.size(), B = hs.front().rows();
  std::vector<Tensor> u(T), logits(T);
  for (std::size_t t = 0; t < T; ++t) {
    u[t] = tanh(dense(hs[t], params.W_h, params.b_n));
    logits[t] = matmul(u[t], params.u_s);
  }
  std::vector<bool> flat(B * T);
  for (std::size_t b = 0; b < B; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) {
      flat[b * T + t] = mask[t][b];
      any = any || mask[t][b];
    }
    if (!any) throw Error("temporal_attention: all positions masked for batch row " +
                          std::to_string(b));
  }
  Tensor alphas = softmax_masked(concat(logits, 1), 1, flat);
  Tensor pooled;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor term = scale_rows(over == AttendOver::projected ? u[t] : hs[t],
                             slice(alphas, 1, t, t + 1));
    pooled = pooled.defined() ? add(pooled, term) : term;
  }
  return {pooled, alphas};
}

Tensor mean_pool(const std::vector<Tensor>& hs, const std::vector<std::vector<bool>>& mask) {
  check_sequence(hs, mask, "mean_pool");
  const std::size_t T = hs.size(), B = hs.front().rows();
  std::vector<double> count(B, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) count[b] += mask[t][b] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < B; ++b) {
    if (count[b] == 0.0) {
      throw Error("mean_pool: all positions masked for batch row " + std::to_string(b));
    }
  }
  Tensor pooled;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> w(B);
    for (std::size_t b = 0; b < B; ++b) w[b] = mask[t][b] ? 1.0 / count[b] : 0.0;
    Tensor term = ad::scale_rows(hs[t], Tensor::column(std::move(w)));
    pooled = pooled.defined() ? ad::add(pooled, term) : term;
  }
  return pooled;
}

Tensor content_forward(const Tensor& x_hat, std::size_t batch, const ContentParams& params,
                       std::size_t k) {
  using namespace nmdps::ad;
  if (batch == 0 || x_hat.rows() % batch != 0) {
    throw ShapeError("content_forward: " + std::to_string(x_hat.rows()) +
                     " rows do not split into " + std::to_string(batch) + " events");
  }
  if (x_hat.cols() != params.dim) {
    throw ShapeError("content_forward: input width " + std::to_string(x_hat.cols()) +
                     " but filters expect " + std::to_string(params.dim));
  }
  const std::size_t n = x_hat.rows() / batch;
  if (n < params.max_height()) {
    throw ShapeError("content_forward: sequence of " + std::to_string(n) +
                     " posts is shorter than the largest filter (" +
                     std::to_string(params.max_height()) + ")");
  }
  if (k == 0 || k > n - params.max_height() + 1) {
    throw ShapeError("content_forward: k=" + std::to_string(k) + " exceeds the " +
                     std::to_string(n - params.max_height() + 1) + " positions available");
  }
  std::vector<Tensor> pooled;
  for (std::size_t i = 0; i < params.heights.size(); ++i) {
    Tensor windows = unfold(x_hat, batch, params.heights[i]);
    Tensor maps = relu(dense(windows, params.filters[i], params.biases[i]));
    pooled.push_back(kmax_pool_grouped(maps, batch, k));
  }
  return pooled.size() == 1 ? pooled.front() : concat(pooled, 1);
}

}  // namespace nmdps
