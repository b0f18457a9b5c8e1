#include "nmdps/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "nmdps/error.hpp"
#include "nmdps/rng.hpp"

namespace nmdps {

std::string to_string(SynthMode m) {
  switch (m) {
    case SynthMode::dynamic_structure: return "dynamic_structure";
    case SynthMode::content: return "content";
    case SynthMode::both: return "both";
    case SynthMode::null: return "null";
  }
  return "null";
}

SynthMode synth_mode_from_string(const std::string& s) {
  if (s == "dynamic_structure") return SynthMode::dynamic_structure;
  if (s == "content") return SynthMode::content;
  if (s == "both") return SynthMode::both;
  if (s == "null") return SynthMode::null;
  throw ConfigError("unknown synth mode '" + s +
                    "' (expected dynamic_structure, content, both or null)");
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth spec: " + m); };
  if (n_events < 2) fail("n_events must be at least 2");
  if (!(rumor_fraction > 0.0 && rumor_fraction < 1.0)) fail("rumor_fraction must be in (0, 1)");
  const std::size_t rumors = static_cast<std::size_t>(std::llround(rumor_fraction * n_events));
  if (rumors == 0 || rumors == n_events) fail("both classes must be represented");
  if (min_posts < 1 || max_posts < min_posts) fail("need 1 <= min_posts <= max_posts");
  if (!(span_seconds > 0.0)) fail("span_seconds must be positive");
  if (!(burst_fraction > 0.0 && burst_fraction <= 1.0)) fail("burst_fraction must be in (0, 1]");
  if (!(burst_share >= 0.0 && burst_share <= 1.0)) fail("burst_share must be in [0, 1]");
  if (!(onset_seconds >= 0.0)) fail("onset_seconds must be non-negative");
  if (!(onset_share >= 0.0 && onset_share < 1.0)) fail("onset_share must be in [0, 1)");
  if (tokens_per_post == 0 || shared_vocab == 0 || class_vocab == 0) {
    fail("token counts and vocabularies must be positive");
  }
  if (!(content_signal >= 0.0 && content_signal <= 1.0)) fail("content_signal must be in [0, 1]");
  if (!(base_time >= 0.0)) fail("base_time must be non-negative");
}

namespace {

bool timing_signal(SynthMode m) {
  return m == SynthMode::dynamic_structure || m == SynthMode::both;
}
bool content_signal(SynthMode m) { return m == SynthMode::content || m == SynthMode::both; }

double reply_offset(const SynthSpec& spec, bool bursty, Rng& rng) {
  if (spec.onset_seconds > 0.0 && rng.bernoulli(spec.onset_share)) {
    return rng.uniform(0.0, spec.onset_seconds);
  }
  double u = rng.uniform();
  if (bursty && rng.bernoulli(spec.burst_share)) u *= spec.burst_fraction;
  return spec.onset_seconds + u * spec.span_seconds;
}

std::string post_text(const SynthSpec& spec, bool class_tokens, int label, Rng& rng) {
  std::string text;
  for (std::size_t i = 0; i < spec.tokens_per_post; ++i) {
    if (i > 0) text += ' ';
    if (class_tokens && rng.bernoulli(spec.content_signal)) {
      text += (label == 1 ? "r" : "n") + std::to_string(rng.below(spec.class_vocab));
    } else {
      text += "w" + std::to_string(rng.below(spec.shared_vocab));
    }
  }
  return text;
}

}  // namespace

std::vector<Event> generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t rumors = static_cast<std::size_t>(std::llround(spec.rumor_fraction * spec.n_events));
  std::vector<int> labels(spec.n_events, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(rumors), 1);
  rng.shuffle(labels);

  std::vector<Event> events;
  events.reserve(spec.n_events);
  for (std::size_t e = 0; e < spec.n_events; ++e) {
    const int label = labels[e];
    // Each event draws from its own stream so events do not shift when the
    // mode changes what a single event consumes.
    Rng er(Rng::derive(spec.seed, e));
    const std::size_t n = spec.min_posts + er.below(spec.max_posts - spec.min_posts + 1);
    std::vector<std::size_t> parent(n, 0);
    for (std::size_t i = 1; i < n; ++i) parent[i] = er.below(i);

    Rng tr(Rng::derive(er.next(), 1));
    const bool bursty = timing_signal(spec.mode) && label == 1;
    std::vector<double> offsets(n - 1);
    for (double& o : offsets) o = reply_offset(spec, bursty, tr);
    std::sort(offsets.begin(), offsets.end());

    Rng cr(Rng::derive(er.next(), 2));
    const bool class_tokens = content_signal(spec.mode);
    const double root_time = spec.base_time + 86400.0 * static_cast<double>(e);
    std::vector<Post> posts(n);
    for (std::size_t i = 0; i < n; ++i) {
      Post& p = posts[i];
      p.id = "p" + std::to_string(i);
      if (i > 0) p.parent_id = "p" + std::to_string(parent[i]);
      // Whole seconds keep offsets exact after the JSON round trip.
      p.timestamp = root_time + (i == 0 ? 0.0 : std::floor(offsets[i - 1]));
      p.text = post_text(spec, class_tokens, label, cr);
      p.kind = i == 0 ? std::nullopt : std::optional<PostKind>(PostKind::reply);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05zu", e);
    events.push_back(make_event(id, label == 1 ? Label::rumor : Label::non_rumor, std::move(posts)));
  }
  return events;
}

}  // namespace nmdps
