#include "nmdps/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nmdps/checkpoint.hpp"
#include "nmdps/error.hpp"
#include "nmdps/rng.hpp"

namespace nmdps {

using json = nlohmann::json;

// ---- optimizer --------------------------------------------------------------

AdamState make_adam(std::span<const NamedTensor> params, double lr, double beta1, double beta2,
                    double epsilon) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor->size(), 0.0);
    s.v.emplace_back(p.tensor->size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const NamedTensor> params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != w.size() || v.size() != w.size()) {
      throw ShapeError("adam_step: state for '" + params[i].name + "' has " +
                       std::to_string(m.size()) + " entries, parameter has " +
                       std::to_string(w.size()));
    }
    auto g = w.grad();
    auto x = w.mutable_values();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = c1 > 0.0 ? m[j] / c1 : m[j];
      const double vhat = c2 > 0.0 ? v[j] / c2 : v[j];
      x[j] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

// ---- configuration ----------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (!(unit_seconds > 0.0)) fail("unit_seconds must be positive");
  if (max_windows == 0) fail("max_windows must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("beta1 and beta2 must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (epochs == 0 || batch_size == 0) fail("epochs and batch_size must be positive");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) fail("valid_fraction must be in [0, 1)");
  if (pv_epochs == 0 || pv_negatives == 0 || !(pv_lr > 0.0)) {
    fail("pv_epochs, pv_negatives and pv_lr must be positive");
  }
  model_config().validate();
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.layer_cap = layer_cap;
  m.d_s = d_s;
  m.hidden = H;
  m.attention = A;
  m.d_w = d_w;
  m.heights = heights;
  m.maps_per_height = maps_per_height;
  m.k = k;
  m.n_max = n_max;
  m.fusion_hidden = fusion_hidden;
  m.dropout = dropout;
  m.variant = variant;
  m.candidate = candidate_nl;
  m.attend_over = attend_over;
  return m;
}

WindowConfig TrainConfig::window_config() const {
  return {unit_seconds, max_windows, layer_cap, ratio_mode};
}

PvDbowConfig TrainConfig::pv_config(std::uint64_t pv_seed) const {
  PvDbowConfig c;
  c.dim = d_w;
  c.epochs = pv_epochs;
  c.negatives = pv_negatives;
  c.lr = pv_lr;
  c.min_count = min_count;
  c.infer_epochs = pv_infer_epochs;
  c.seed = pv_seed;
  return c;
}

namespace {

json to_json(const TrainConfig& c) {
  return json{{"unit_seconds", c.unit_seconds},
              {"max_windows", c.max_windows},
              {"layer_cap", c.layer_cap},
              {"ratio_mode", to_string(c.ratio_mode)},
              {"d_s", c.d_s},
              {"H", c.H},
              {"A", c.A},
              {"d_w", c.d_w},
              {"heights", c.heights},
              {"maps_per_height", c.maps_per_height},
              {"k", c.k},
              {"n_max", c.n_max},
              {"fusion_hidden", c.fusion_hidden},
              {"dropout", c.dropout},
              {"variant", to_string(c.variant)},
              {"candidate_nl", to_string(c.candidate_nl)},
              {"attend_over", to_string(c.attend_over)},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"valid_fraction", c.valid_fraction},
              {"max_posts", c.max_posts},
              {"min_count", c.min_count},
              {"pv_epochs", c.pv_epochs},
              {"pv_negatives", c.pv_negatives},
              {"pv_lr", c.pv_lr},
              {"pv_infer_epochs", c.pv_infer_epochs}};
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config: '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return v.get<double>();
}

std::string as_text(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

void set_field(TrainConfig& c, const std::string& key, const json& v) {
  if (key == "unit_seconds") c.unit_seconds = as_real(v, key);
  else if (key == "max_windows") c.max_windows = as_count(v, key);
  else if (key == "layer_cap") c.layer_cap = as_count(v, key);
  else if (key == "ratio_mode") c.ratio_mode = ratio_mode_from_string(as_text(v, key));
  else if (key == "d_s") c.d_s = as_count(v, key);
  else if (key == "H") c.H = as_count(v, key);
  else if (key == "A") c.A = as_count(v, key);
  else if (key == "d_w") c.d_w = as_count(v, key);
  else if (key == "heights") {
    if (!v.is_array()) throw ConfigError("config: 'heights' must be an array of integers");
    c.heights.clear();
    for (const auto& h : v) c.heights.push_back(as_count(h, key));
  } else if (key == "maps_per_height") c.maps_per_height = as_count(v, key);
  else if (key == "k") c.k = as_count(v, key);
  else if (key == "n_max") c.n_max = as_count(v, key);
  else if (key == "fusion_hidden") c.fusion_hidden = as_count(v, key);
  else if (key == "dropout") c.dropout = as_real(v, key);
  else if (key == "variant") c.variant = variant_from_string(as_text(v, key));
  else if (key == "candidate_nl") c.candidate_nl = candidate_activation_from_string(as_text(v, key));
  else if (key == "attend_over") c.attend_over = attend_over_from_string(as_text(v, key));
  else if (key == "lr") c.lr = as_real(v, key);
  else if (key == "beta1") c.beta1 = as_real(v, key);
  else if (key == "beta2") c.beta2 = as_real(v, key);
  else if (key == "epsilon") c.epsilon = as_real(v, key);
  else if (key == "epochs") c.epochs = as_count(v, key);
  else if (key == "batch_size") c.batch_size = as_count(v, key);
  else if (key == "seed") c.seed = as_count(v, key);
  else if (key == "valid_fraction") c.valid_fraction = as_real(v, key);
  else if (key == "max_posts") c.max_posts = as_count(v, key);
  else if (key == "min_count") c.min_count = as_count(v, key);
  else if (key == "pv_epochs") c.pv_epochs = as_count(v, key);
  else if (key == "pv_negatives") c.pv_negatives = as_count(v, key);
  else if (key == "pv_lr") c.pv_lr = as_real(v, key);
  else if (key == "pv_infer_epochs") c.pv_infer_epochs = as_count(v, key);
  else throw ConfigError("config: unknown key '" + key + "'");
}

TrainConfig from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrainConfig c = base;
  for (auto it = j.begin(); it != j.end(); ++it) set_field(c, it.key(), it.value());
  return c;
}

}  // namespace

std::string config_to_json(const TrainConfig& config, int indent) {
  return to_json(config).dump(indent);
}

TrainConfig config_from_json(const std::string& text, const TrainConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json(j, base);
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str(), base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    v = text;
  }
  set_field(config, key, v);
}

// ---- features ---------------------------------------------------------------

std::string post_key(const Event& event, const Post& post) {
  return event.event_id + "/" + post.id;
}

ContentEncoder ContentEncoder::fit(std::span<const Event> train, const TrainConfig& config,
                                   std::uint64_t seed) {
  std::vector<Document> corpus;
  for (const Event& e : train) {
    for (const Post& p : e.posts) corpus.emplace_back(post_key(e, p), tokenize(p.text));
  }
  return from_model(train_pv_dbow(corpus, config.pv_config(seed)), config.n_max);
}

ContentEncoder ContentEncoder::pretrained(PostEmbeddingStore store, std::size_t n_max) {
  ContentEncoder c;
  c.n_max_ = n_max;
  c.store_ = std::move(store);
  return c;
}

ContentEncoder ContentEncoder::from_model(PvDbowModel model, std::size_t n_max) {
  ContentEncoder c;
  c.n_max_ = n_max;
  c.pv_ = std::move(model);
  return c;
}

std::size_t ContentEncoder::dim() const {
  if (pv_) return pv_->dim();
  if (store_) return store_->dim();
  return 0;
}

std::vector<double> ContentEncoder::encode(const Event& event) const {
  const std::size_t d = dim();
  if (d == 0) throw Error("ContentEncoder: not fitted");
  std::vector<double> out(n_max_ * d, 0.0);
  const std::size_t n = std::min(n_max_, event.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Post& p = event.posts[i];
    const std::string key = post_key(event, p);
    std::vector<double> v;
    if (pv_) {
      v = pv_->infer(tokenize(p.text), key);
    } else {
      const auto* found = store_->find(key);
      if (!found) found = store_->find(p.id);
      if (found) v = *found;
    }
    if (!v.empty()) std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return out;
}

EventFeatures TrainedModel::features(const Event& event) const {
  const Event capped = cap_posts(event, config.max_posts);
  EventFeatures f = structure_features(capped, config.window_config());
  if (uses_content(config.variant)) f.content = encoder.encode(capped);
  return f;
}

namespace {

std::vector<EventFeatures> featurize_all(const TrainedModel& m, std::span<const Event> events) {
  std::vector<EventFeatures> out;
  out.reserve(events.size());
  for (const Event& e : events) out.push_back(m.features(e));
  return out;
}

std::vector<double> predict_features(const std::vector<EventFeatures>& feats,
                                     const ModelParams& params, const ModelConfig& mc,
                                     std::size_t batch_size) {
  std::vector<double> y;
  y.reserve(feats.size());
  Rng unused(0);
  for (std::size_t s = 0; s < feats.size(); s += batch_size) {
    std::vector<const EventFeatures*> batch;
    for (std::size_t i = s; i < std::min(feats.size(), s + batch_size); ++i) batch.push_back(&feats[i]);
    ForwardOutput out = forward(batch, params, mc, false, unused);
    for (double v : out.y_hat.values()) y.push_back(v);
  }
  return y;
}

}  // namespace

std::vector<Prediction> TrainedModel::predict(std::span<const Event> events) const {
  const auto feats = featurize_all(*this, events);
  const auto y = predict_features(feats, params, config.model_config(), config.batch_size);
  std::vector<Prediction> out;
  out.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    out.push_back({events[i].event_id, y[i], events[i].label_value()});
  }
  return out;
}

// ---- training ---------------------------------------------------------------

FoldResult train_fold(std::span<const Event> train, std::span<const Event> valid,
                      const TrainConfig& config, const PostEmbeddingStore* pretrained) {
  config.validate();
  if (train.empty() || valid.empty()) throw Error("train_fold: empty training or validation split");
  if (count_label(train, Label::rumor) == 0 || count_label(train, Label::non_rumor) == 0) {
    throw Error("train_fold: degenerate split, the training set holds a single class");
  }
  const ModelConfig mc = config.model_config();

  FoldResult result;
  TrainedModel& model = result.model;
  model.config = config;
  if (uses_content(config.variant)) {
    if (pretrained) {
      if (pretrained->dim() != config.d_w) {
        throw ConfigError("pretrained embeddings have dim " + std::to_string(pretrained->dim()) +
                          " but d_w is " + std::to_string(config.d_w));
      }
      model.encoder = ContentEncoder::pretrained(*pretrained, config.n_max);
    } else {
      std::vector<Event> capped;
      for (const Event& e : train) capped.push_back(cap_posts(e, config.max_posts));
      model.encoder = ContentEncoder::fit(capped, config, Rng::derive(config.seed, 3));
    }
  }

  Rng init_rng(Rng::derive(config.seed, 0));
  Rng order_rng(Rng::derive(config.seed, 1));
  Rng dropout_rng(Rng::derive(config.seed, 2));
  model.params = ModelParams::init(mc, init_rng);

  const auto train_feats = featurize_all(model, train);
  const auto valid_feats = featurize_all(model, valid);
  std::vector<int> valid_labels;
  for (const auto& f : valid_feats) valid_labels.push_back(f.label);

  auto named = model.params.named();
  AdamState adam = make_adam(named, config.lr, config.beta1, config.beta2, config.epsilon);
  std::vector<std::size_t> order(train_feats.size());
  std::iota(order.begin(), order.end(), 0);

  ModelParams best;
  double best_acc = -1.0, best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
      std::vector<const EventFeatures*> batch;
      std::vector<int> labels;
      for (std::size_t i = s; i < std::min(order.size(), s + config.batch_size); ++i) {
        batch.push_back(&train_feats[order[i]]);
        labels.push_back(train_feats[order[i]].label);
      }
      for (auto& p : named) p.tensor->zero_grad();
      ForwardOutput out = forward(batch, model.params, mc, true, dropout_rng);
      Tensor loss = bce_loss(out.y_hat, labels);
      ad::backward(loss);
      adam_step(named, adam);
      epoch_loss += loss.item();
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(train_feats.size()));

    const auto y = predict_features(valid_feats, model.params, mc, config.batch_size);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += (y[i] >= 0.5) == (valid_labels[i] == 1);
    const double acc = static_cast<double>(correct) / static_cast<double>(y.size());
    const double vloss = bce_loss_value(y, valid_labels);
    result.valid_accuracy.push_back(acc);
    if (acc > best_acc || (acc == best_acc && vloss < best_loss)) {
      best_acc = acc;
      best_loss = vloss;
      best = model.params.clone();
      result.best_epoch = epoch;
    }
  }
  for (auto& p : named) p.tensor->zero_grad();
  model.params = std::move(best);

  const auto y = predict_features(valid_feats, model.params, mc, config.batch_size);
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < y.size(); ++i) preds.push_back({valid_feats[i].event_id, y[i], valid_labels[i]});
  result.valid_report = evaluate(preds);
  return result;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::span<const Event> events, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> train, valid;
  if (fraction <= 0.0) {
    train.resize(events.size());
    std::iota(train.begin(), train.end(), 0);
    return {train, train};
  }
  Rng rng(seed);
  std::vector<bool> held(events.size(), false);
  for (Label label : {Label::non_rumor, Label::rumor}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (events[i].label == label) idx.push_back(i);
    }
    rng.shuffle(idx);
    std::size_t take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    else take = 0;
    for (std::size_t i = 0; i < take; ++i) held[idx[i]] = true;
  }
  for (std::size_t i = 0; i < events.size(); ++i) (held[i] ? valid : train).push_back(i);
  if (valid.empty()) valid = train;
  return {train, valid};
}

namespace {

template <typename T>
std::vector<T> pick(std::span<const T> items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

struct FoldOutcome {
  MetricsReport report;
  std::vector<Prediction> predictions;
  std::vector<double> loss_curve;
  std::size_t best_epoch = 0;
};

FoldOutcome run_fold(std::span<const Event> events, const FoldPlan& plan, std::size_t fold,
                     const TrainConfig& config, const PostEmbeddingStore* pretrained) {
  TrainConfig fc = config;
  fc.seed = Rng::derive(config.seed, fold);
  const auto test = pick(events, plan.members(events, fold));
  const auto rest = pick(events, plan.complement(events, fold));
  auto [tr, va] = split_validation(rest, fc.valid_fraction, Rng::derive(fc.seed, 4));
  const auto train = pick(std::span<const Event>(rest), tr);
  const auto valid = pick(std::span<const Event>(rest), va);
  FoldResult r = train_fold(train, valid, fc, pretrained);
  FoldOutcome o;
  o.predictions = r.model.predict(test);
  o.report = evaluate(o.predictions);
  o.loss_curve = std::move(r.loss_curve);
  o.best_epoch = r.best_epoch;
  return o;
}

}  // namespace

CvResult cross_validate(std::span<const Event> events, const TrainConfig& config,
                        std::size_t n_folds, std::size_t parallel_folds,
                        const PostEmbeddingStore* pretrained) {
  config.validate();
  const FoldPlan plan = make_folds(events, n_folds, config.seed);
  std::vector<FoldOutcome> outcomes(n_folds);
  std::vector<std::exception_ptr> errors(n_folds);

  const std::size_t workers = std::clamp<std::size_t>(parallel_folds, 1, n_folds);
  if (workers == 1) {
    for (std::size_t f = 0; f < n_folds; ++f) outcomes[f] = run_fold(events, plan, f, config, pretrained);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto work = [&]() {
      for (;;) {
        std::size_t f;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= n_folds) return;
          f = next++;
        }
        try {
          outcomes[f] = run_fold(events, plan, f, config, pretrained);
        } catch (...) {
          errors[f] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  CvResult result;
  std::vector<MetricsReport> folds;
  for (auto& o : outcomes) {
    folds.push_back(o.report);
    result.predictions.insert(result.predictions.end(), o.predictions.begin(), o.predictions.end());
    result.loss_curves.push_back(std::move(o.loss_curve));
    result.best_epochs.push_back(o.best_epoch);
  }
  result.report = aggregate_folds(std::move(folds));
  return result;
}

double parse_deadline(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid deadline '" + text + "'");
  }
  const std::string unit = text.substr(used);
  double scale = 1.0;
  if (unit == "h") scale = 3600.0;
  else if (unit == "m") scale = 60.0;
  else if (unit == "s" || unit.empty()) scale = 1.0;
  else throw ConfigError("invalid deadline unit in '" + text + "' (use s, m or h)");
  if (!(v >= 0.0) || std::isinf(v)) throw ConfigError("deadline must be non-negative: '" + text + "'");
  return v * scale;
}

std::string format_deadline(double seconds) {
  if (std::isinf(seconds)) return "inf";
  std::ostringstream out;
  out.precision(17);
  out << seconds;
  return out.str();
}

std::vector<double> default_deadlines() {
  std::vector<double> d;
  for (double h : {0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 24.0, 48.0}) d.push_back(h * 3600.0);
  return d;
}

std::vector<EarlyPoint> early_detection_sweep(std::span<const Event> events,
                                              const TrainConfig& config,
                                              std::span<const double> deadlines,
                                              std::size_t n_folds, std::size_t parallel_folds,
                                              const PostEmbeddingStore* pretrained) {
  if (deadlines.empty()) throw ConfigError("early detection: no deadlines");
  for (std::size_t i = 0; i < deadlines.size(); ++i) {
    if (!(deadlines[i] >= 0.0)) throw ConfigError("early detection: negative deadline");
    if (i > 0 && deadlines[i] < deadlines[i - 1]) {
      throw ConfigError("early detection: deadlines must be sorted ascending");
    }
  }
  std::vector<EarlyPoint> curve;
  for (double d : deadlines) {
    std::vector<Event> cut;
    cut.reserve(events.size());
    for (const Event& e : events) cut.push_back(truncate_at_deadline(e, d));
    curve.push_back({d, cross_validate(cut, config, n_folds, parallel_folds, pretrained).report});
  }
  return curve;
}

// ---- checkpoints ------------------------------------------------------------

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  Archive ar;
  for (const auto& nt : const_cast<ModelParams&>(model.params).named()) {
    const auto v = nt.tensor->values();
    ar.arrays.push_back({nt.name, {nt.tensor->rows(), nt.tensor->cols()}, {v.begin(), v.end()}});
  }
  json meta{{"config", to_json(model.config)}};
  if (const PvDbowModel* pv = model.encoder.model()) {
    const auto& words = pv->word_vectors();
    ar.arrays.push_back({"text.word_out", {pv->vocab().size(), pv->dim()}, words});
    meta["encoder"] = {{"kind", "pv_dbow"},
                       {"seed", pv->config().seed},
                       {"tokens", pv->vocab().tokens()},
                       {"counts", pv->vocab().counts()}};
  } else if (model.encoder.dim() > 0) {
    throw Error("save_model: models with pretrained embeddings are not checkpointed; "
                "keep the embedding file alongside the configuration instead");
  }
  ar.meta_json = meta.dump();
  write_archive(path, ar);
}

TrainedModel load_model(const std::filesystem::path& path) {
  const Archive ar = read_archive(path);
  json meta;
  try {
    meta = json::parse(ar.meta_json);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": bad checkpoint metadata: " + e.what(), 0);
  }
  if (!meta.is_object() || !meta.contains("config")) {
    throw ParseError(path.string() + ": checkpoint has no config", 0);
  }
  TrainedModel m;
  m.config = from_json(meta["config"], TrainConfig{});
  m.config.validate();
  Rng rng(0);
  m.params = ModelParams::init(m.config.model_config(), rng);
  for (auto& nt : m.params.named()) {
    const NamedArray* a = ar.find(nt.name);
    if (!a) throw ParseError(path.string() + ": missing array '" + nt.name + "'", 0);
    if (a->shape != std::vector<std::size_t>{nt.tensor->rows(), nt.tensor->cols()}) {
      throw ShapeError(path.string() + ": array '" + nt.name + "' has the wrong shape");
    }
    std::copy(a->values.begin(), a->values.end(), nt.tensor->mutable_values().begin());
  }
  if (meta.contains("encoder")) {
    const json& enc = meta["encoder"];
    const NamedArray* words = ar.find("text.word_out");
    if (!words) throw ParseError(path.string() + ": missing array 'text.word_out'", 0);
    Vocabulary vocab = Vocabulary::from_tokens(enc.at("tokens").get<std::vector<std::string>>(),
                                               enc.at("counts").get<std::vector<std::uint64_t>>());
    PvDbowModel pv(m.config.pv_config(enc.at("seed").get<std::uint64_t>()), std::move(vocab),
                   words->values);
    m.encoder = ContentEncoder::from_model(std::move(pv), m.config.n_max);
  } else if (uses_content(m.config.variant)) {
    throw ParseError(path.string() + ": content model without text encoder", 0);
  }
  return m;
}

}  // namespace nmdps
