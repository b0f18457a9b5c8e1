#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nmdps/dataset.hpp"
#include "nmdps/rng.hpp"
#include "nmdps/trainer.hpp"

namespace nmdps::test {

struct P {
  std::string id;
  std::string parent;  // empty for the root
  double t;
  std::string text = "";
};

inline Event event(const std::string& id, int label, const std::vector<P>& ps) {
  std::vector<Post> posts;
  for (const auto& p : ps) {
    Post post;
    post.id = p.id;
    if (!p.parent.empty()) post.parent_id = p.parent;
    post.timestamp = p.t;
    post.text = p.text;
    posts.push_back(post);
  }
  return make_event(id, label == 1 ? Label::rumor : Label::non_rumor, std::move(posts));
}

// Random tree with integer offsets; parents always precede children in time.
inline Event random_event(Rng& rng, const std::string& id, std::size_t max_posts = 40,
                          double base = 1000.0, int max_offset = 20000) {
  const std::size_t n = 1 + rng.below(max_posts);
  std::vector<P> ps{{"p0", "", base}};
  std::vector<double> t{base};
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = rng.below(i);
    const double ti = t[parent] + static_cast<double>(rng.below(static_cast<std::uint64_t>(max_offset)));
    t.push_back(ti);
    ps.push_back({"p" + std::to_string(i), "p" + std::to_string(parent), ti});
  }
  return event(id, static_cast<int>(rng.below(2)), ps);
}

// Small sizes so whole cross-validation runs take seconds.
inline TrainConfig compact_config() {
  TrainConfig c;
  c.max_windows = 32;
  c.d_s = 16;
  c.H = 16;
  c.A = 16;
  c.d_w = 16;
  c.maps_per_height = 8;
  c.n_max = 32;
  c.fusion_hidden = 32;
  c.epochs = 30;
  c.batch_size = 16;
  c.lr = 5e-3;
  c.pv_epochs = 10;
  c.pv_infer_epochs = 10;
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nmdps-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace nmdps::test
