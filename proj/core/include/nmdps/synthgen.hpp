#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nmdps/dataset.hpp"

namespace nmdps {

// Where the class signal lives.
//   dynamic_structure: timing profiles differ, tree shapes do not.
//   content:           token pools differ, timing and shapes do not.
//   both:              timing and tokens differ.
//   null:              no difference at all.
enum class SynthMode { dynamic_structure, content, both, null };

std::string to_string(SynthMode m);
SynthMode synth_mode_from_string(const std::string& s);

// Tree shapes come from a uniform-attachment branching process shared by both
// classes: post i picks its parent uniformly among posts 0..i-1. Reply
// offsets are drawn independently, sorted, and handed out in post order, so
// parents never postdate their children.
//
// Timing after the onset: non-rumors spread posts uniformly over the span;
// rumors put burst_share of them uniformly in the first burst_fraction of the
// span and the rest uniformly over the whole span. Before onset_seconds both
// classes post identically (onset_share of replies, uniform in [0, onset)).
struct SynthSpec {
  std::size_t n_events = 100;
  double rumor_fraction = 0.5;
  SynthMode mode = SynthMode::dynamic_structure;
  std::uint64_t seed = 1;

  std::size_t min_posts = 20;  // including the root
  std::size_t max_posts = 60;
  double span_seconds = 4.0 * 3600.0;
  double burst_fraction = 0.2;
  double burst_share = 0.8;
  double onset_seconds = 0.0;
  double onset_share = 0.2;

  std::size_t tokens_per_post = 8;
  std::size_t shared_vocab = 200;
  std::size_t class_vocab = 40;
  // Probability that a token comes from the class pool in content/both modes.
  double content_signal = 0.5;

  double base_time = 1.5e9;

  void validate() const;
};

std::vector<Event> generate(const SynthSpec& spec);

}  // namespace nmdps
