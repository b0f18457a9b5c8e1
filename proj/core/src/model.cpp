#include "nmdps/model.hpp"

#include <algorithm>
#include <cmath>

#include "nmdps/error.hpp"

namespace nmdps {

using namespace nmdps::ad;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::structure_only: return "structure_only";
    case Variant::structure_only_no_attention: return "structure_only_no_attention";
    case Variant::content_only: return "content_only";
  }
  return "full";
}

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "structure_only") return Variant::structure_only;
  if (s == "structure_only_no_attention") return Variant::structure_only_no_attention;
  if (s == "content_only") return Variant::content_only;
  throw ConfigError("unknown variant '" + s +
                    "' (expected full, structure_only, structure_only_no_attention or "
                    "content_only)");
}

bool uses_structure(Variant v) { return v != Variant::content_only; }
bool uses_content(Variant v) { return v == Variant::full || v == Variant::content_only; }

namespace {
bool uses_attention(Variant v) { return v == Variant::full || v == Variant::structure_only; }
}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (fusion_hidden == 0) fail("fusion_hidden must be positive");
  if (uses_structure(variant)) {
    if (layer_cap == 0 || d_s == 0 || hidden == 0) fail("layer_cap, d_s and H must be positive");
    if (uses_attention(variant) && attention == 0) fail("A must be positive");
  }
  if (uses_content(variant)) {
    if (d_w == 0 || maps_per_height == 0 || k == 0) fail("d_w, maps_per_height and k must be positive");
    if (heights.empty()) fail("heights must not be empty");
    if (std::find(heights.begin(), heights.end(), 0u) != heights.end()) fail("heights must be positive");
    const std::size_t hmax = *std::max_element(heights.begin(), heights.end());
    if (n_max < hmax) {
      fail("n_max (" + std::to_string(n_max) + ") is smaller than the largest filter height (" +
           std::to_string(hmax) + ")");
    }
    if (k > n_max - hmax + 1) {
      fail("k (" + std::to_string(k) + ") exceeds the " + std::to_string(n_max - hmax + 1) +
           " convolution positions");
    }
  }
}

std::size_t ModelConfig::structure_dim() const {
  if (!uses_structure(variant)) return 0;
  if (uses_attention(variant) && attend_over == AttendOver::projected) return attention;
  return 2 * hidden;
}

std::size_t ModelConfig::content_dim() const {
  return uses_content(variant) ? heights.size() * maps_per_height * k : 0;
}

EventFeatures structure_features(const Event& event, const WindowConfig& windows) {
  const WindowedStructure ws = featurize(event, windows);
  EventFeatures f;
  f.event_id = event.event_id;
  f.label = event.label_value();
  f.n_windows = ws.n_windows();
  f.structure.reserve(f.n_windows * 3 * ws.layer_cap());
  for (std::size_t t = 1; t <= ws.n_windows(); ++t) {
    const auto raw = raw_feature_vector(ws, t);
    f.structure.insert(f.structure.end(), raw.begin(), raw.end());
  }
  return f;
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.variant = config.variant;
  if (uses_structure(config.variant)) {
    p.embed_W = glorot(3 * config.layer_cap, config.d_s, rng);
    p.embed_b = zero_bias(config.d_s);
    p.gru_fwd = GruParams::init(config.d_s, config.hidden, rng);
    p.gru_bwd = GruParams::init(config.d_s, config.hidden, rng);
    if (uses_attention(config.variant)) {
      p.attention = AttentionParams::init(2 * config.hidden, config.attention, rng);
    }
  }
  if (uses_content(config.variant)) {
    p.content = ContentParams::init(config.heights, config.maps_per_height, config.d_w, rng);
  }
  const std::size_t fused = config.structure_dim() + config.content_dim();
  p.fusion_W1 = glorot(fused, config.fusion_hidden, rng);
  p.fusion_b1 = zero_bias(config.fusion_hidden);
  p.fusion_W2 = glorot(config.fusion_hidden, 1, rng);
  p.fusion_b2 = zero_bias(1);
  return p;
}

std::vector<NamedTensor> ModelParams::named() {
  std::vector<NamedTensor> out;
  if (uses_structure(variant)) {
    out.push_back({"structure.embed_W", &embed_W});
    out.push_back({"structure.embed_b", &embed_b});
    gru_fwd.collect("structure.gru_fwd", out);
    gru_bwd.collect("structure.gru_bwd", out);
    if (uses_attention(variant)) attention.collect("structure.attention", out);
  }
  if (uses_content(variant)) content.collect("content", out);
  out.push_back({"fusion.W1", &fusion_W1});
  out.push_back({"fusion.b1", &fusion_b1});
  out.push_back({"fusion.W2", &fusion_W2});
  out.push_back({"fusion.b2", &fusion_b2});
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams c = *this;
  auto src = const_cast<ModelParams*>(this)->named();
  auto dst = c.named();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->detach(true);
  return c;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : const_cast<ModelParams*>(this)->named()) n += t.tensor->size();
  return n;
}

ForwardOutput forward(std::span<const EventFeatures* const> batch, const ModelParams& params,
                      const ModelConfig& config, bool train, Rng& rng) {
  if (batch.empty()) throw Error("forward: empty batch");
  if (params.variant != config.variant) {
    throw ConfigError("forward: parameters are for variant " + to_string(params.variant) +
                      " but config asks for " + to_string(config.variant));
  }
  const std::size_t B = batch.size();
  ForwardOutput out;
  std::vector<Tensor> parts;

  if (uses_content(config.variant)) {
    const std::size_t rows = config.n_max, dim = config.d_w;
    std::vector<double> x;
    x.reserve(B * rows * dim);
    for (const EventFeatures* f : batch) {
      if (f->content.size() != rows * dim) {
        throw ShapeError("forward: event '" + f->event_id + "' has " +
                         std::to_string(f->content.size()) + " content values, expected " +
                         std::to_string(rows) + " x " + std::to_string(dim));
      }
      x.insert(x.end(), f->content.begin(), f->content.end());
    }
    parts.push_back(content_forward(Tensor({B * rows, dim}, std::move(x)), B, params.content,
                                    config.k));
  }

  if (uses_structure(config.variant)) {
    const std::size_t width = 3 * config.layer_cap;
    std::size_t T = 0;
    for (const EventFeatures* f : batch) {
      if (f->n_windows == 0 || f->structure.size() != f->n_windows * width) {
        throw ShapeError("forward: event '" + f->event_id + "' structure features do not match " +
                         std::to_string(f->n_windows) + " windows x " + std::to_string(width));
      }
      T = std::max(T, f->n_windows);
    }
    std::vector<Tensor> xs(T);
    std::vector<std::vector<bool>> mask(T, std::vector<bool>(B));
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> x(B * width, 0.0);
      for (std::size_t b = 0; b < B; ++b) {
        mask[t][b] = t < batch[b]->n_windows;
        if (mask[t][b]) {
          std::copy_n(batch[b]->structure.begin() + static_cast<std::ptrdiff_t>(t * width), width,
                      x.begin() + static_cast<std::ptrdiff_t>(b * width));
        }
      }
      xs[t] = embed_substructure(Tensor({B, width}, std::move(x)), params.embed_W, params.embed_b);
    }
    auto hs = bigru_forward(xs, mask, params.gru_fwd, params.gru_bwd, config.candidate);
    if (uses_attention(config.variant)) {
      AttentionOutput att = temporal_attention(hs, mask, params.attention, config.attend_over);
      parts.push_back(att.pooled);
      out.alphas = att.alphas;
    } else {
      parts.push_back(mean_pool(hs, mask));
    }
  }

  Tensor fused = parts.size() == 1 ? parts.front() : concat(parts, 1);
  Tensor hidden = relu(dense(fused, params.fusion_W1, params.fusion_b1));
  hidden = dropout(hidden, config.dropout, train, rng);
  out.y_hat = sigmoid(dense(hidden, params.fusion_W2, params.fusion_b2));
  return out;
}

namespace {
constexpr double kClip = 1e-12;
}

Tensor bce_loss(const Tensor& y_hat, std::span<const int> labels) {
  if (y_hat.cols() != 1 || y_hat.rows() != labels.size()) {
    throw ShapeError("bce_loss: " + y_hat.shape().str() + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<double> pos(labels.size()), neg(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pos[i] = labels[i] == 1 ? 1.0 : 0.0;
    neg[i] = 1.0 - pos[i];
  }
  Tensor p = clamp(y_hat, kClip, 1.0 - kClip);
  Tensor ll = add(mul(Tensor::column(std::move(pos)), log(p)),
                  mul(Tensor::column(std::move(neg)), log(affine(p, -1.0, 1.0))));
  return affine(sum(ll), -1.0, 0.0);
}

double bce_loss_value(std::span<const double> y_hat, std::span<const int> labels) {
  if (y_hat.size() != labels.size()) {
    throw ShapeError("bce_loss: " + std::to_string(y_hat.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    const double p = std::clamp(y_hat[i], kClip, 1.0 - kClip);
    loss -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

ad::GradCheckReport check_model_gradients(Variant variant, std::uint64_t seed, double epsilon,
                                          double tolerance) {
  ModelConfig cfg;
  cfg.layer_cap = 2;
  cfg.d_s = 3;
  cfg.hidden = 3;
  cfg.attention = 3;
  cfg.d_w = 3;
  cfg.heights = {2, 3};
  cfg.maps_per_height = 2;
  cfg.k = 2;
  cfg.n_max = 5;
  cfg.fusion_hidden = 4;
  cfg.variant = variant;

  Rng rng(seed);
  ModelParams params = ModelParams::init(cfg, rng);
  // Non-zero biases so their gradients are exercised away from the origin;
  // positive ones keep ReLU units active.
  for (auto& nt : params.named()) {
    if (nt.tensor->rows() == 1 && nt.name.find("W") == std::string::npos) {
      for (double& v : nt.tensor->mutable_values()) v = rng.uniform(0.05, 0.3);
    }
  }

  std::vector<EventFeatures> events(2);
  const std::size_t windows[2] = {3, 2};
  const std::size_t posts[2] = {5, 3};
  for (std::size_t e = 0; e < 2; ++e) {
    EventFeatures& f = events[e];
    f.event_id = "micro-" + std::to_string(e);
    f.label = static_cast<int>(e);
    f.n_windows = windows[e];
    f.structure.resize(windows[e] * 3 * cfg.layer_cap);
    for (double& v : f.structure) v = rng.uniform(0.0, 1.0);
    if (uses_content(variant)) {
      f.content.assign(cfg.n_max * cfg.d_w, 0.0);
      for (std::size_t i = 0; i < posts[e] * cfg.d_w; ++i) f.content[i] = rng.uniform(-1.0, 1.0);
    }
  }
  const EventFeatures* batch[2] = {&events[0], &events[1]};
  const int labels[2] = {0, 1};

  std::vector<Tensor> leaves;
  for (auto& nt : params.named()) leaves.push_back(*nt.tensor);
  Rng unused(0);
  auto f = [&]() {
    ForwardOutput o = forward(batch, params, cfg, false, unused);
    return bce_loss(o.y_hat, labels);
  };
  return grad_check(f, leaves, epsilon, tolerance);
}

}  // namespace nmdps
