#include "nmdps/structpart.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nmdps/error.hpp"

namespace nmdps {

WindowedStructure::WindowedStructure(std::size_t max_windows, std::size_t layer_cap)
    : max_windows_(max_windows),
      layer_cap_(layer_cap),
      n_windows_(1),
      n_(max_windows * layer_cap, 0),
      p_(max_windows * layer_cap, 0.0),
      l_(max_windows * layer_cap, 0.0) {}

std::size_t WindowedStructure::at(std::size_t window, std::size_t layer) const {
  if (window < 1 || window > max_windows_ || layer < 1 || layer > layer_cap_) {
    throw Error("WindowedStructure: window " + std::to_string(window) + " / layer " +
                std::to_string(layer) + " out of range");
  }
  return (window - 1) * layer_cap_ + (layer - 1);
}

long WindowedStructure::total_count() const {
  long total = 0;
  for (int v : n_) total += v;
  return total;
}

std::vector<std::size_t> assign_windows(const Event& event, double unit_seconds,
                                        std::size_t max_windows) {
  if (!(unit_seconds > 0.0)) throw Error("assign_windows: unit_seconds must be positive");
  if (max_windows == 0) throw Error("assign_windows: max_windows must be positive");
  std::vector<std::size_t> windows(event.posts.size());
  for (std::size_t i = 0; i < event.posts.size(); ++i) {
    double w = std::floor(event.offset(i) / unit_seconds) + 1.0;
    windows[i] = static_cast<std::size_t>(
        std::clamp(w, 1.0, static_cast<double>(max_windows)));
  }
  return windows;
}

WindowedStructure featurize(const Event& event, const WindowConfig& config) {
  if (config.layer_cap == 0) throw Error("featurize: layer_cap must be positive");
  const auto windows = assign_windows(event, config.unit_seconds, config.max_windows);
  const std::size_t L = config.layer_cap;

  WindowedStructure ws(config.max_windows, L);
  std::size_t last = 1;
  for (std::size_t i = 0; i < event.posts.size(); ++i) {
    last = std::max(last, windows[i]);
    if (event.depth[i] == 0) continue;  // the root carries no layer signal
    std::size_t layer = std::min<std::size_t>(static_cast<std::size_t>(event.depth[i]), L);
    ++ws.n_[ws.at(windows[i], layer)];
  }
  ws.n_windows_ = std::min(config.max_windows, last);

  for (std::size_t t = 1; t <= config.max_windows; ++t) {
    int total = 0;
    for (std::size_t j = 1; j <= L; ++j) total += ws.n_[ws.at(t, j)];
    for (std::size_t j = 1; j <= L; ++j) {
      const std::size_t k = ws.at(t, j);
      const int n = ws.n_[k];
      ws.p_[k] = total > 0 ? static_cast<double>(n) / total : 0.0;
      int denom = 0;
      if (config.ratio_mode == RatioMode::adjacent_layer) {
        if (j >= 2) denom = ws.n_[ws.at(t, j - 1)];
      } else if (t >= 2) {
        denom = ws.n_[ws.at(t - 1, j)];
      }
      ws.l_[k] = denom > 0 ? static_cast<double>(n) / denom : 0.0;
    }
  }
  return ws;
}

std::vector<double> raw_feature_vector(const WindowedStructure& ws, std::size_t window) {
  if (window < 1 || window > ws.n_windows()) {
    throw Error("raw_feature_vector: window " + std::to_string(window) +
                " outside [1, " + std::to_string(ws.n_windows()) + "]");
  }
  const std::size_t L = ws.layer_cap();
  std::vector<double> out(3 * L);
  for (std::size_t j = 1; j <= L; ++j) {
    out[j - 1] = ws.share(window, j);
    out[L + j - 1] = ws.ratio(window, j);
    out[2 * L + j - 1] = std::log1p(static_cast<double>(ws.count(window, j)));
  }
  return out;
}

void write_feature_csv(std::ostream& out, const WindowedStructure& ws,
                       const std::optional<std::string>& event_id, bool header) {
  if (header) out << (event_id ? "event_id," : "") << "window,layer,n,p,l\n";
  for (std::size_t t = 1; t <= ws.n_windows(); ++t) {
    for (std::size_t j = 1; j <= ws.layer_cap(); ++j) {
      if (event_id) out << *event_id << ',';
      out << t << ',' << j << ',' << ws.count(t, j) << ',' << ws.share(t, j) << ','
          << ws.ratio(t, j) << '\n';
    }
  }
}

std::string to_string(RatioMode mode) {
  return mode == RatioMode::adjacent_layer ? "adjacent_layer" : "adjacent_window";
}

RatioMode ratio_mode_from_string(const std::string& s) {
  if (s == "adjacent_layer") return RatioMode::adjacent_layer;
  if (s == "adjacent_window") return RatioMode::adjacent_window;
  throw ConfigError("unknown ratio_mode '" + s +
                    "' (expected adjacent_layer or adjacent_window)");
}

}  // namespace nmdps
