#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nmdps/dataset.hpp"

namespace nmdps {

// How the layer ratio l[t][j] is formed: against the previous layer of the
// same window, or against the same layer of the previous window.
enum class RatioMode { adjacent_layer, adjacent_window };

struct WindowConfig {
  double unit_seconds = 1200.0;
  std::size_t max_windows = 100;
  std::size_t layer_cap = 5;
  RatioMode ratio_mode = RatioMode::adjacent_layer;
};

// Per-window, per-layer statistics of a propagation tree. Windows and layers
// are 1-based in every accessor: window 1 holds the root, layer j holds posts
// of (clamped) depth j. Storage covers max_windows windows; windows past
// n_windows() are padding and masked out.
class WindowedStructure {
 public:
  WindowedStructure() = default;
  WindowedStructure(std::size_t max_windows, std::size_t layer_cap);

  std::size_t n_windows() const { return n_windows_; }
  std::size_t max_windows() const { return max_windows_; }
  std::size_t layer_cap() const { return layer_cap_; }

  int count(std::size_t window, std::size_t layer) const { return n_[at(window, layer)]; }
  double share(std::size_t window, std::size_t layer) const { return p_[at(window, layer)]; }
  double ratio(std::size_t window, std::size_t layer) const { return l_[at(window, layer)]; }
  bool mask(std::size_t window) const { return window >= 1 && window <= n_windows_; }

  // Sum of counts over all windows and layers.
  long total_count() const;

  bool operator==(const WindowedStructure&) const = default;

 private:
  friend WindowedStructure featurize(const Event&, const WindowConfig&);
  std::size_t at(std::size_t window, std::size_t layer) const;

  std::size_t max_windows_ = 0;
  std::size_t layer_cap_ = 0;
  std::size_t n_windows_ = 0;
  std::vector<int> n_;
  std::vector<double> p_;
  std::vector<double> l_;
};

// 1-based window index of each post, parallel to event.posts.
std::vector<std::size_t> assign_windows(const Event& event, double unit_seconds,
                                        std::size_t max_windows);

WindowedStructure featurize(const Event& event, const WindowConfig& config);

// [p(1..L) | l(1..L) | log(1 + n(1..L))] for a 1-based window index.
std::vector<double> raw_feature_vector(const WindowedStructure& ws,
                                       std::size_t window);

// CSV with header "window,layer,n,p,l" (prefixed by "event_id," when an id is
// given), one row per real window and layer.
void write_feature_csv(std::ostream& out, const WindowedStructure& ws,
                       const std::optional<std::string>& event_id = std::nullopt,
                       bool header = true);

std::string to_string(RatioMode mode);
RatioMode ratio_mode_from_string(const std::string& s);

}  // namespace nmdps
