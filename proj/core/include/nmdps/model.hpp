#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nmdps/autodiff.hpp"
#include "nmdps/netblocks.hpp"
#include "nmdps/rng.hpp"
#include "nmdps/structpart.hpp"

namespace nmdps {

enum class Variant { full, structure_only, structure_only_no_attention, content_only };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
bool uses_structure(Variant v);
bool uses_content(Variant v);

struct ModelConfig {
  std::size_t layer_cap = 5;
  std::size_t d_s = 32;
  std::size_t hidden = 64;
  std::size_t attention = 64;
  std::size_t d_w = 50;
  std::vector<std::size_t> heights{5, 6, 7};
  std::size_t maps_per_height = 30;
  std::size_t k = 3;
  std::size_t n_max = 128;
  std::size_t fusion_hidden = 64;
  double dropout = 0.5;
  Variant variant = Variant::full;
  CandidateActivation candidate = CandidateActivation::tanh;
  AttendOver attend_over = AttendOver::projected;

  // Throws ConfigError on inconsistent sizes.
  void validate() const;
  std::size_t structure_dim() const;  // 0 when the variant has no structure path
  std::size_t content_dim() const;    // 0 when the variant has no content path
};

// Model inputs for one event.
struct EventFeatures {
  std::string event_id;
  int label = 0;
  // n_windows rows of 3 * layer_cap raw window features, row-major.
  std::size_t n_windows = 0;
  std::vector<double> structure;
  // n_max rows of d_w post vectors, row-major, zero rows past the last post.
  // Empty for variants without a content path.
  std::vector<double> content;
};

// Raw window features of an event; content left empty.
EventFeatures structure_features(const Event& event, const WindowConfig& windows);

struct ModelParams {
  Variant variant = Variant::full;
  Tensor embed_W, embed_b;
  GruParams gru_fwd, gru_bwd;
  AttentionParams attention;
  ContentParams content;
  Tensor fusion_W1, fusion_b1, fusion_W2, fusion_b2;

  static ModelParams init(const ModelConfig& config, Rng& rng);
  // Parameters used by the variant, in a fixed order with stable names.
  std::vector<NamedTensor> named();
  // Deep copy with fresh leaves.
  ModelParams clone() const;
  std::size_t parameter_count() const;
};

struct ForwardOutput {
  Tensor y_hat;   // B x 1 probabilities
  Tensor alphas;  // B x T attention weights; undefined without attention
};

// One batch through the network. `rng` feeds dropout and is only drawn from
// when train is true.
ForwardOutput forward(std::span<const EventFeatures* const> batch, const ModelParams& params,
                      const ModelConfig& config, bool train, Rng& rng);

// Summed binary cross-entropy with y_hat clipped to [1e-12, 1 - 1e-12].
Tensor bce_loss(const Tensor& y_hat, std::span<const int> labels);
double bce_loss_value(std::span<const double> y_hat, std::span<const int> labels);

// Finite-difference check of the loss gradient with respect to every
// parameter of a small model on a two-event batch of unequal lengths.
ad::GradCheckReport check_model_gradients(Variant variant, std::uint64_t seed,
                                          double epsilon = 1e-5, double tolerance = 1e-3);

}  // namespace nmdps
