#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmdps/dataset.hpp"
#include "nmdps/metrics.hpp"
#include "nmdps/model.hpp"
#include "nmdps/netblocks.hpp"
#include "nmdps/structpart.hpp"
#include "nmdps/textrep.hpp"

namespace nmdps {

// ---- optimizer --------------------------------------------------------------

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

AdamState make_adam(std::span<const NamedTensor> params, double lr, double beta1, double beta2,
                    double epsilon);

// One update from the gradients currently held by params (a parameter with no
// gradient counts as a zero gradient). Gradients are left in place.
void adam_step(std::span<const NamedTensor> params, AdamState& state);

// ---- configuration ----------------------------------------------------------

struct TrainConfig {
  // structure partitioning
  double unit_seconds = 1200.0;
  std::size_t max_windows = 100;
  std::size_t layer_cap = 5;
  RatioMode ratio_mode = RatioMode::adjacent_layer;
  // network
  std::size_t d_s = 32;
  std::size_t H = 64;
  std::size_t A = 64;
  std::size_t d_w = 50;
  std::vector<std::size_t> heights{5, 6, 7};
  std::size_t maps_per_height = 30;
  std::size_t k = 3;
  std::size_t n_max = 128;
  std::size_t fusion_hidden = 64;
  double dropout = 0.5;
  Variant variant = Variant::full;
  CandidateActivation candidate_nl = CandidateActivation::tanh;
  AttendOver attend_over = AttendOver::projected;
  // optimization
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  // Share of each class in a training split held out to pick the checkpoint;
  // 0 selects on the training split itself.
  double valid_fraction = 0.1;
  // data and text
  std::size_t max_posts = 0;  // per-event cap, 0 = none
  std::size_t min_count = 2;
  std::size_t pv_epochs = 20;
  std::size_t pv_negatives = 5;
  double pv_lr = 0.025;
  std::size_t pv_infer_epochs = 20;

  void validate() const;
  ModelConfig model_config() const;
  WindowConfig window_config() const;
  PvDbowConfig pv_config(std::uint64_t seed) const;
};

// JSON object with the field names above. Parsing starts from `base` and
// rejects unknown keys and ill-typed values.
std::string config_to_json(const TrainConfig& config, int indent = 2);
TrainConfig config_from_json(const std::string& text, const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = {});
// Applies "key=value" where value is JSON (bare words are taken as strings).
void apply_override(TrainConfig& config, const std::string& assignment);

// ---- features ---------------------------------------------------------------

// Maps an event's earliest n_max posts to d_w-dimensional vectors. Fitted
// encoders train paragraph vectors on training texts only and infer every
// post's vector with frozen word vectors, training posts included, so train
// and test features come from one procedure. Pretrained encoders look posts
// up by "event_id/post_id", then by post id; misses give zero rows.
class ContentEncoder {
 public:
  ContentEncoder() = default;
  static ContentEncoder fit(std::span<const Event> train, const TrainConfig& config,
                            std::uint64_t seed);
  static ContentEncoder pretrained(PostEmbeddingStore store, std::size_t n_max);
  static ContentEncoder from_model(PvDbowModel model, std::size_t n_max);

  std::size_t dim() const;
  std::size_t n_max() const { return n_max_; }
  const PvDbowModel* model() const { return pv_ ? &*pv_ : nullptr; }
  std::vector<double> encode(const Event& event) const;

 private:
  std::size_t n_max_ = 0;
  std::optional<PvDbowModel> pv_;
  std::optional<PostEmbeddingStore> store_;
};

std::string post_key(const Event& event, const Post& post);

// ---- training ---------------------------------------------------------------

struct TrainedModel {
  TrainConfig config;
  ModelParams params;
  ContentEncoder encoder;

  EventFeatures features(const Event& event) const;
  std::vector<Prediction> predict(std::span<const Event> events) const;
};

struct FoldResult {
  TrainedModel model;
  std::vector<double> loss_curve;      // mean training loss per event, per epoch
  std::vector<double> valid_accuracy;  // per epoch
  std::size_t best_epoch = 0;          // 0-based
  MetricsReport valid_report;
};

// Trains on `train`, keeping the epoch with the best validation accuracy
// (lower validation loss breaks ties, then the earlier epoch). Throws when
// the training split lacks a class.
FoldResult train_fold(std::span<const Event> train, std::span<const Event> valid,
                      const TrainConfig& config, const PostEmbeddingStore* pretrained = nullptr);

struct CvResult {
  MetricsReport report;
  std::vector<Prediction> predictions;  // fold by fold
  std::vector<std::vector<double>> loss_curves;
  std::vector<std::size_t> best_epochs;
};

// Fold f is tested by a model trained on the other folds; its validation
// split is carved from those training folds. Fold f trains with seed
// Rng::derive(config.seed, f). parallel_folds > 1 trains that many folds at
// once with identical results.
CvResult cross_validate(std::span<const Event> events, const TrainConfig& config,
                        std::size_t n_folds = 5, std::size_t parallel_folds = 1,
                        const PostEmbeddingStore* pretrained = nullptr);

struct EarlyPoint {
  double deadline = 0.0;  // seconds; infinity means untruncated
  MetricsReport report;
};

std::vector<EarlyPoint> early_detection_sweep(std::span<const Event> events,
                                              const TrainConfig& config,
                                              std::span<const double> deadlines,
                                              std::size_t n_folds = 5,
                                              std::size_t parallel_folds = 1,
                                              const PostEmbeddingStore* pretrained = nullptr);

// "inf", plain seconds, or a number with an s/m/h suffix.
double parse_deadline(const std::string& text);
std::string format_deadline(double seconds);
std::vector<double> default_deadlines();

// Stratified holdout of `fraction` of each class (at least one per class when
// the class has two or more members). Returns (train, valid) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::span<const Event> events, double fraction, std::uint64_t seed);

// ---- checkpoints ------------------------------------------------------------

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace nmdps
