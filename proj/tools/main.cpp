// nmdps: command-line front end for the rumor-detection pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "convert.hpp"
#include "nmdps/autodiff.hpp"
#include "nmdps/dataset.hpp"
#include "nmdps/error.hpp"
#include "nmdps/gradcheck.hpp"
#include "nmdps/metrics.hpp"
#include "nmdps/model.hpp"
#include "nmdps/structpart.hpp"
#include "nmdps/synthgen.hpp"
#include "nmdps/textrep.hpp"
#include "nmdps/trainer.hpp"
#include "nmdps/wlkernel.hpp"

namespace {

using namespace nmdps;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

// Writes to a file, or to stdout when path is "-".
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path == "-") {
    write(std::cout);
  } else {
    std::ofstream out = open_out(path);
    write(out);
  }
}

// ---- shared configuration flags ---------------------------------------------

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> variant;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr, dropout;
  std::optional<std::uint64_t> seed;
  std::string embeddings;
};

void add_config_options(CLI::App* app, ConfigArgs& a, bool with_embeddings = true) {
  app->add_option("--config", a.config_path,
                  "JSON training configuration (see `nmdps config` for every key and default)")
      ->check(CLI::ExistingFile);
  app->add_option("--set", a.overrides, "Override a config key, e.g. --set H=32 --set heights=[2,3]");
  app->add_option("--variant", a.variant,
                  "full | structure_only | structure_only_no_attention | content_only (default full)");
  app->add_option("--epochs", a.epochs, "Training epochs (default 50)");
  app->add_option("--batch-size", a.batch_size, "Mini-batch size (default 32)");
  app->add_option("--lr", a.lr, "Adam learning rate (default 0.001)");
  app->add_option("--dropout", a.dropout, "Dropout on the fusion hidden layer (default 0.5)");
  app->add_option("--seed", a.seed, "Random seed (default 1)");
  if (with_embeddings) {
    app->add_option("--embeddings", a.embeddings,
                    "Pretrained post embeddings (skips per-fold paragraph-vector training)")
        ->check(CLI::ExistingFile);
  }
}

TrainConfig resolve(const ConfigArgs& a) {
  TrainConfig c;
  if (!a.config_path.empty()) c = load_config(a.config_path);
  for (const auto& o : a.overrides) apply_override(c, o);
  if (a.variant) c.variant = variant_from_string(*a.variant);
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.lr) c.lr = *a.lr;
  if (a.dropout) c.dropout = *a.dropout;
  if (a.seed) c.seed = *a.seed;
  c.validate();
  return c;
}

std::optional<PostEmbeddingStore> pretrained(const ConfigArgs& a) {
  if (a.embeddings.empty()) return std::nullopt;
  return load_embeddings(a.embeddings);
}

std::vector<Event> read_events(const std::string& path) {
  LoadStats stats;
  auto events = load_events(path, &stats);
  if (stats.clamped_timestamps > 0) {
    std::cerr << "note: clamped " << stats.clamped_timestamps
              << " reply timestamps up to their parent's\n";
  }
  return events;
}

// ---- subcommands ------------------------------------------------------------

int run_convert(const std::string& format, const std::string& labels, const std::string& dir,
                const std::string& out) {
  tools::ConvertResult r;
  if (format == "weibo") r = tools::convert_weibo(labels, dir);
  else if (format == "twitter-tree") r = tools::convert_twitter_tree(labels, dir);
  else throw ConfigError("unknown format '" + format + "' (expected weibo or twitter-tree)");
  emit(out, [&](std::ostream& o) { write_events(o, r.events); });
  std::cerr << "converted " << r.events.size() << " events (" << r.stats.posts << " posts), skipped "
            << r.skipped.size() << ", clamped " << r.stats.clamped_timestamps << " timestamps\n";
  for (const auto& s : r.skipped) std::cerr << "  skipped " << s << "\n";
  return 0;
}

int run_featurize(const std::string& events_path, const std::string& out, const WindowConfig& wc) {
  const auto events = read_events(events_path);
  emit(out, [&](std::ostream& o) {
    bool header = true;
    for (const Event& e : events) {
      write_feature_csv(o, featurize(e, wc), e.event_id, header);
      header = false;
    }
  });
  return 0;
}

int run_embed(const std::string& events_path, const std::string& load, const std::string& out,
              PvDbowConfig pv) {
  PostEmbeddingStore store;
  if (!load.empty()) {
    store = load_embeddings(load);
  } else {
    if (events_path.empty()) throw ConfigError("embed: give --events to train or --load to convert");
    const auto events = read_events(events_path);
    std::vector<Document> corpus;
    for (const Event& e : events) {
      for (const Post& p : e.posts) corpus.emplace_back(post_key(e, p), tokenize(p.text));
    }
    PvDbowModel model = train_pv_dbow(corpus, pv);
    store = model.documents();
    const auto& loss = model.epoch_loss();
    if (!loss.empty()) std::cerr << "final epoch loss " << loss.back() << "\n";
  }
  emit(out, [&](std::ostream& o) { write_embeddings(o, store); });
  std::cerr << "wrote " << store.size() << " vectors of dim " << store.dim() << "\n";
  return 0;
}

int run_train(const std::string& events_path, const ConfigArgs& args, const std::string& out,
              const std::string& loss_csv) {
  const TrainConfig config = resolve(args);
  const auto events = read_events(events_path);
  const auto store = pretrained(args);
  auto [tr, va] = split_validation(events, config.valid_fraction, Rng::derive(config.seed, 4));
  std::vector<Event> train, valid;
  for (auto i : tr) train.push_back(events[i]);
  for (auto i : va) valid.push_back(events[i]);
  FoldResult r = train_fold(train, valid, config, store ? &*store : nullptr);
  if (!out.empty()) save_model(out, r.model);
  if (!loss_csv.empty()) {
    emit(loss_csv, [&](std::ostream& o) {
      o << "epoch,loss,valid_accuracy\n";
      for (std::size_t e = 0; e < r.loss_curve.size(); ++e) {
        o << e + 1 << ',' << format_number(r.loss_curve[e]) << ','
          << format_number(r.valid_accuracy[e]) << '\n';
      }
    });
  }
  std::cout << "best epoch " << r.best_epoch + 1 << ", validation accuracy "
            << format_number(r.valid_report.accuracy) << "\n";
  return 0;
}

int run_cv(const std::string& events_path, const ConfigArgs& args, std::size_t folds,
           std::size_t parallel, const std::string& report, const std::string& predictions,
           bool table) {
  const TrainConfig config = resolve(args);
  const auto events = read_events(events_path);
  const auto store = pretrained(args);
  CvResult r = cross_validate(events, config, folds, parallel, store ? &*store : nullptr);
  const std::string variant = to_string(config.variant);
  if (!report.empty()) emit(report, [&](std::ostream& o) { write_report_csv(o, variant, r.report); });
  if (!predictions.empty()) {
    emit(predictions, [&](std::ostream& o) { write_predictions_csv(o, variant, r.predictions); });
  }
  if (table) {
    TableRow row{variant, r.report};
    std::cout << render_table(std::span<const TableRow>(&row, 1));
  }
  std::cout << "mean accuracy " << format_number(r.report.mean_accuracy()) << "\n";
  return 0;
}

int run_early(const std::string& events_path, const ConfigArgs& args, std::size_t folds,
              std::size_t parallel, const std::string& deadline_list, const std::string& out) {
  const TrainConfig config = resolve(args);
  const auto events = read_events(events_path);
  const auto store = pretrained(args);
  std::vector<double> deadlines;
  if (deadline_list.empty()) {
    deadlines = default_deadlines();
  } else {
    std::stringstream ss(deadline_list);
    std::string item;
    while (std::getline(ss, item, ',')) deadlines.push_back(parse_deadline(item));
  }
  const auto curve =
      early_detection_sweep(events, config, deadlines, folds, parallel, store ? &*store : nullptr);
  emit(out, [&](std::ostream& o) {
    o << "deadline_seconds,accuracy,f1_rumor,f1_nonrumor\n";
    for (const auto& p : curve) {
      o << format_deadline(p.deadline) << ',' << format_number(p.report.mean_accuracy()) << ','
        << format_number(p.report.mean_f1_rumor()) << ','
        << format_number(p.report.mean_f1_nonrumor()) << '\n';
    }
  });
  return 0;
}

int run_wl(const std::string& events_path, const std::string& a, const std::string& b,
           double unit, std::size_t iterations, const std::string& labeling, bool baseline,
           std::size_t folds, std::uint64_t seed, const std::string& out) {
  const auto events = read_events(events_path);
  const NodeLabeling lab = node_labeling_from_string(labeling);
  if (baseline) {
    const auto r = wl_nearest_neighbor_cv(events, folds, seed, iterations, lab);
    emit(out, [&](std::ostream& o) { write_report_csv(o, "wl_1nn", r.report); });
    std::cerr << "mean accuracy " << format_number(r.report.mean_accuracy()) << "\n";
    return 0;
  }
  if (a.empty() || b.empty()) throw ConfigError("wl: give --a and --b (or --baseline)");
  const Event* ea = find_event(events, a);
  const Event* eb = find_event(events, b);
  if (!ea) throw Error("wl: no event '" + a + "'");
  if (!eb) throw Error("wl: no event '" + b + "'");
  const auto trace = similarity_trace(*ea, *eb, unit, iterations, lab);
  emit(out, [&](std::ostream& o) {
    o << "window,similarity\n";
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) o << i + 1 << ',' << format_number(trace[i]) << '\n';
    o << "final," << format_number(trace.back()) << '\n';
  });
  return 0;
}

int run_synth(const SynthSpec& spec, const std::string& mode, const std::string& out) {
  SynthSpec s = spec;
  s.mode = synth_mode_from_string(mode);
  const auto events = generate(s);
  emit(out, [&](std::ostream& o) { write_events(o, events); });
  std::cerr << "generated " << events.size() << " events (" << count_label(events, Label::rumor)
            << " rumors)\n";
  return 0;
}

int run_gradcheck(std::size_t trials, std::uint64_t seed) {
  bool ok = true;
  const auto prims = ad::check_primitives(trials, seed);
  for (const auto& p : prims) {
    std::printf("%-5s %-22s trials=%zu max_rel_error=%.3e\n", p.passed ? "PASS" : "FAIL",
                p.op.c_str(), p.trials, p.max_rel_error);
    ok = ok && p.passed;
  }
  for (Variant v : {Variant::full, Variant::structure_only, Variant::structure_only_no_attention,
                    Variant::content_only}) {
    const auto r = check_model_gradients(v, seed);
    std::printf("%-5s model:%-28s params=%zu max_rel_error=%.3e\n", r.passed ? "PASS" : "FAIL",
                to_string(v).c_str(), r.checked, r.max_rel_error);
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

int run_predict(const std::string& model_path, const std::string& events_path,
                const std::string& out) {
  const TrainedModel model = load_model(model_path);
  const auto events = read_events(events_path);
  const auto preds = model.predict(events);
  emit(out, [&](std::ostream& o) { write_predictions_csv(o, to_string(model.config.variant), preds); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nmdps: rumor detection from dynamic propagation structure and post content"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  // convert
  std::string c_format, c_labels, c_dir, c_out = "-";
  auto* convert = app.add_subcommand("convert", "Convert a public dataset dump to event JSON-Lines");
  convert->add_option("--format", c_format, "weibo | twitter-tree")->required();
  convert->add_option("--labels", c_labels, "Label file of the dump")->required()->check(CLI::ExistingFile);
  convert->add_option("--dir", c_dir, "Directory of per-event files")->required()->check(CLI::ExistingDirectory);
  convert->add_option("--out", c_out, "Output JSON-Lines file, - for stdout")->capture_default_str();

  // featurize
  std::string f_events, f_out = "-";
  WindowConfig wc;
  std::string f_ratio = "adjacent_layer";
  auto* feat = app.add_subcommand("featurize", "Per-window structural features as CSV");
  feat->add_option("--events", f_events, "Event JSON-Lines file")->required()->check(CLI::ExistingFile);
  feat->add_option("--out", f_out, "Output CSV, - for stdout")->capture_default_str();
  feat->add_option("--unit-seconds", wc.unit_seconds, "Window length in seconds")->capture_default_str();
  feat->add_option("--max-windows", wc.max_windows, "Window cap")->capture_default_str();
  feat->add_option("--layer-cap", wc.layer_cap, "Depth cap")->capture_default_str();
  feat->add_option("--ratio-mode", f_ratio, "adjacent_layer | adjacent_window")->capture_default_str();

  // embed
  std::string e_events, e_load, e_out = "-";
  PvDbowConfig pv;
  auto* embed = app.add_subcommand("embed", "Train paragraph vectors for every post, or re-emit a loaded file");
  embed->add_option("--events", e_events, "Event JSON-Lines file to train on")->check(CLI::ExistingFile);
  embed->add_option("--load", e_load, "Existing embedding file to validate and copy")->check(CLI::ExistingFile);
  embed->add_option("--out", e_out, "Output embedding file, - for stdout")->capture_default_str();
  embed->add_option("--dim", pv.dim, "Vector dimension")->capture_default_str();
  embed->add_option("--epochs", pv.epochs, "Training epochs")->capture_default_str();
  embed->add_option("--negatives", pv.negatives, "Negative samples per token")->capture_default_str();
  embed->add_option("--lr", pv.lr, "Initial learning rate (linear decay)")->capture_default_str();
  embed->add_option("--min-count", pv.min_count, "Minimum token frequency")->capture_default_str();
  embed->add_option("--seed", pv.seed, "Random seed")->capture_default_str();

  // train
  std::string t_events, t_out, t_loss;
  ConfigArgs t_args;
  auto* train = app.add_subcommand("train", "Train one model (validation split held out of the events)");
  train->add_option("--events", t_events, "Event JSON-Lines file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", t_out, "Checkpoint file to write");
  train->add_option("--loss-csv", t_loss, "Per-epoch loss curve CSV");
  add_config_options(train, t_args);

  // cv
  std::string v_events, v_report, v_pred;
  std::size_t v_folds = 5, v_parallel = 1;
  bool v_table = false;
  ConfigArgs v_args;
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  cv->add_option("--events", v_events, "Event JSON-Lines file")->required()->check(CLI::ExistingFile);
  cv->add_option("--folds", v_folds, "Number of folds")->capture_default_str();
  cv->add_option("--parallel-folds", v_parallel, "Folds trained concurrently")->capture_default_str();
  cv->add_option("--report", v_report, "Report CSV (variant,fold,accuracy,f1_rumor,f1_nonrumor)");
  cv->add_option("--predictions", v_pred, "Prediction CSV (event_id,y_hat,label,variant)");
  cv->add_flag("--table", v_table, "Print an accuracy/F1 table");
  add_config_options(cv, v_args);

  // early
  std::string y_events, y_deadlines, y_out = "-";
  std::size_t y_folds = 5, y_parallel = 1;
  ConfigArgs y_args;
  auto* early = app.add_subcommand("early", "Accuracy versus detection deadline");
  early->add_option("--events", y_events, "Event JSON-Lines file")->required()->check(CLI::ExistingFile);
  early->add_option("--deadlines", y_deadlines,
                    "Comma-separated deadlines: inf, seconds, or with s/m/h suffix "
                    "(default 0.5h,1h,2h,4h,8h,12h,24h,48h)");
  early->add_option("--folds", y_folds, "Number of folds")->capture_default_str();
  early->add_option("--parallel-folds", y_parallel, "Folds trained concurrently")->capture_default_str();
  early->add_option("--out", y_out, "Curve CSV, - for stdout")->capture_default_str();
  add_config_options(early, y_args);

  // wl
  std::string w_events, w_a, w_b, w_label = "depth", w_out = "-";
  double w_unit = 1200.0;
  std::size_t w_iter = 3, w_folds = 5;
  std::uint64_t w_seed = 1;
  bool w_baseline = false;
  auto* wl = app.add_subcommand("wl", "WL-kernel similarity trace between two events, or the 1-NN baseline");
  wl->add_option("--events", w_events, "Event JSON-Lines file")->required()->check(CLI::ExistingFile);
  wl->add_option("--a", w_a, "First event id");
  wl->add_option("--b", w_b, "Second event id");
  wl->add_option("--unit-seconds", w_unit, "Window length in seconds")->capture_default_str();
  wl->add_option("--iterations", w_iter, "WL refinement rounds")->capture_default_str();
  wl->add_option("--labeling", w_label, "Initial node labels: depth | uniform")->capture_default_str();
  wl->add_flag("--baseline", w_baseline, "Cross-validate the WL 1-nearest-neighbour classifier instead");
  wl->add_option("--folds", w_folds, "Folds for --baseline")->capture_default_str();
  wl->add_option("--seed", w_seed, "Fold seed for --baseline")->capture_default_str();
  wl->add_option("--out", w_out, "Output CSV, - for stdout")->capture_default_str();

  // synth
  SynthSpec spec;
  std::string s_mode = "dynamic_structure", s_out = "-";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled event set");
  synth->add_option("--mode", s_mode, "dynamic_structure | content | both | null")->capture_default_str();
  synth->add_option("--n-events", spec.n_events, "Number of events")->capture_default_str();
  synth->add_option("--rumor-fraction", spec.rumor_fraction, "Share of rumors")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--min-posts", spec.min_posts, "Fewest posts per event")->capture_default_str();
  synth->add_option("--max-posts", spec.max_posts, "Most posts per event")->capture_default_str();
  synth->add_option("--span-seconds", spec.span_seconds, "Diffusion span after onset")->capture_default_str();
  synth->add_option("--burst-fraction", spec.burst_fraction, "Leading share of the span holding the rumor burst")->capture_default_str();
  synth->add_option("--burst-share", spec.burst_share, "Share of rumor posts in the burst")->capture_default_str();
  synth->add_option("--onset-seconds", spec.onset_seconds, "Class-independent lead-in period")->capture_default_str();
  synth->add_option("--onset-share", spec.onset_share, "Share of posts in the lead-in")->capture_default_str();
  synth->add_option("--tokens-per-post", spec.tokens_per_post, "Tokens per post text")->capture_default_str();
  synth->add_option("--content-signal", spec.content_signal, "Chance a token comes from the class pool")->capture_default_str();
  synth->add_option("--out", s_out, "Output JSON-Lines, - for stdout")->capture_default_str();

  // gradcheck
  std::size_t g_trials = 100;
  std::uint64_t g_seed = 1;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every op and the full model");
  grad->add_option("--trials", g_trials, "Random trials per primitive")->capture_default_str();
  grad->add_option("--seed", g_seed, "Random seed")->capture_default_str();

  // predict
  std::string p_model, p_events, p_out = "-";
  auto* predict = app.add_subcommand("predict", "Score events with a trained checkpoint");
  predict->add_option("--model", p_model, "Checkpoint from `train --out`")->required()->check(CLI::ExistingFile);
  predict->add_option("--events", p_events, "Event JSON-Lines file")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", p_out, "Prediction CSV, - for stdout")->capture_default_str();

  // config
  ConfigArgs k_args;
  auto* config = app.add_subcommand("config", "Print the resolved training configuration as JSON");
  add_config_options(config, k_args, false);
  std::string k_out = "-";
  config->add_option("--out", k_out, "Output JSON file, - for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*convert) return run_convert(c_format, c_labels, c_dir, c_out);
    if (*feat) {
      wc.ratio_mode = ratio_mode_from_string(f_ratio);
      return run_featurize(f_events, f_out, wc);
    }
    if (*embed) return run_embed(e_events, e_load, e_out, pv);
    if (*train) return run_train(t_events, t_args, t_out, t_loss);
    if (*cv) return run_cv(v_events, v_args, v_folds, v_parallel, v_report, v_pred, v_table);
    if (*early) return run_early(y_events, y_args, y_folds, y_parallel, y_deadlines, y_out);
    if (*wl) {
      return run_wl(w_events, w_a, w_b, w_unit, w_iter, w_label, w_baseline, w_folds, w_seed, w_out);
    }
    if (*synth) return run_synth(spec, s_mode, s_out);
    if (*grad) return run_gradcheck(g_trials, g_seed);
    if (*predict) return run_predict(p_model, p_events, p_out);
    if (*config) {
      const std::string json = config_to_json(resolve(k_args));
      emit(k_out, [&](std::ostream& out) { out << json << "\n"; });
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
