#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nmdps {

enum class Label : int { non_rumor = 0, rumor = 1 };

enum class PostKind { repost, reply, unknown };

struct Post {
  std::string id;
  std::optional<std::string> parent_id;  // empty for the root
  double timestamp = 0.0;                // seconds since epoch
  std::string text;
  std::optional<PostKind> kind;

  bool operator==(const Post&) const = default;
};

// One labeled diffusion cascade.
//
// Events are only created through make_event(), which validates the tree,
// clamps child timestamps up to their parent's, and orders posts by
// (timestamp, post id) with the root first. parent_index and depth are
// parallel to posts; parent_index of the root is -1.
struct Event {
  std::string event_id;
  Label label = Label::non_rumor;
  std::vector<Post> posts;
  std::vector<int> parent_index;
  std::vector<int> depth;

  const Post& root() const { return posts.front(); }
  std::size_t size() const { return posts.size(); }
  // Seconds between post i and the root.
  double offset(std::size_t i) const {
    return posts[i].timestamp - posts.front().timestamp;
  }
  int label_value() const { return static_cast<int>(label); }

  bool operator==(const Event&) const = default;
};

struct LoadStats {
  std::size_t events = 0;
  std::size_t posts = 0;
  std::size_t clamped_timestamps = 0;
};

// Validates and normalizes a raw post list into an Event. Throws
// ValidationError naming event_id on a missing root, multiple roots,
// duplicate ids, orphan parents, cycles, or negative/non-finite timestamps.
Event make_event(std::string event_id, Label label, std::vector<Post> posts,
                 LoadStats* stats = nullptr);

// Reads a JSON-Lines event file. Blank lines are skipped. Duplicate event ids
// across lines are rejected.
std::vector<Event> load_events(const std::filesystem::path& path,
                               LoadStats* stats = nullptr);
std::vector<Event> parse_events(std::istream& in, LoadStats* stats = nullptr);

std::string event_to_json_line(const Event& event);
void write_events(std::ostream& out, std::span<const Event> events);
void write_events(const std::filesystem::path& path,
                  std::span<const Event> events);

const Event* find_event(std::span<const Event> events, const std::string& id);

// Stratified assignment of events to folds.
struct FoldPlan {
  std::size_t n_folds = 0;
  std::map<std::string, std::size_t> assignment;

  std::size_t fold_of(const std::string& event_id) const;
  // Indices (into the events passed to make_folds) belonging to fold f.
  std::vector<std::size_t> members(std::span<const Event> events,
                                   std::size_t fold) const;
  std::vector<std::size_t> complement(std::span<const Event> events,
                                      std::size_t fold) const;
};

FoldPlan make_folds(std::span<const Event> events, std::size_t n_folds,
                    std::uint64_t seed);

// Posts with offset <= deadline seconds; the root is always kept.
Event truncate_at_deadline(const Event& event, double deadline);

// Keeps at most max_posts posts (earliest first) while preserving tree
// closure. max_posts == 0 means no cap.
Event cap_posts(const Event& event, std::size_t max_posts);

std::size_t count_label(std::span<const Event> events, Label label);

}  // namespace nmdps
