#include "nmdps/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "nmdps/error.hpp"
#include "nmdps/rng.hpp"

namespace nmdps {

using nlohmann::json;

Event make_event(std::string event_id, Label label, std::vector<Post> posts,
                 LoadStats* stats) {
  if (posts.empty()) throw ValidationError(event_id, "missing root (no posts)");

  std::unordered_map<std::string, std::size_t> index;
  index.reserve(posts.size());
  std::size_t root = posts.size();
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const Post& p = posts[i];
    if (p.id.empty()) throw ValidationError(event_id, "post with empty id");
    if (!std::isfinite(p.timestamp) || p.timestamp < 0.0) {
      throw ValidationError(event_id, "post '" + p.id +
                                          "' has a negative or non-finite "
                                          "timestamp");
    }
    if (!index.emplace(p.id, i).second) {
      throw ValidationError(event_id, "duplicate post id '" + p.id + "'");
    }
    if (!p.parent_id) {
      if (root != posts.size()) {
        throw ValidationError(event_id, "multiple roots ('" + posts[root].id +
                                            "' and '" + p.id + "')");
      }
      root = i;
    }
  }
  if (root == posts.size()) throw ValidationError(event_id, "missing root");

  std::vector<std::vector<std::size_t>> children(posts.size());
  std::vector<int> parent(posts.size(), -1);
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (i == root) continue;
    auto it = index.find(*posts[i].parent_id);
    if (it == index.end()) {
      throw ValidationError(event_id, "post '" + posts[i].id +
                                          "' references unknown parent '" +
                                          *posts[i].parent_id + "'");
    }
    if (it->second == i) {
      throw ValidationError(event_id,
                            "cycle: post '" + posts[i].id + "' is its own parent");
    }
    parent[i] = static_cast<int>(it->second);
    children[it->second].push_back(i);
  }

  // Breadth-first from the root: depths, reachability, timestamp clamping.
  std::vector<int> depth(posts.size(), -1);
  std::vector<std::size_t> queue{root};
  depth[root] = 0;
  std::size_t clamped = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    std::size_t u = queue[head];
    for (std::size_t c : children[u]) {
      depth[c] = depth[u] + 1;
      if (posts[c].timestamp < posts[u].timestamp) {
        posts[c].timestamp = posts[u].timestamp;
        ++clamped;
      }
      queue.push_back(c);
    }
  }
  if (queue.size() != posts.size()) {
    for (std::size_t i = 0; i < posts.size(); ++i) {
      if (depth[i] < 0) {
        throw ValidationError(event_id, "cycle or disconnected component at post '" +
                                            posts[i].id + "'");
      }
    }
  }

  std::vector<std::size_t> order(posts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if ((a == root) != (b == root)) return a == root;
    if (posts[a].timestamp != posts[b].timestamp) {
      return posts[a].timestamp < posts[b].timestamp;
    }
    return posts[a].id < posts[b].id;
  });
  std::vector<int> new_pos(posts.size());
  for (std::size_t k = 0; k < order.size(); ++k) new_pos[order[k]] = static_cast<int>(k);

  Event ev;
  ev.event_id = std::move(event_id);
  ev.label = label;
  ev.posts.reserve(posts.size());
  ev.parent_index.reserve(posts.size());
  ev.depth.reserve(posts.size());
  for (std::size_t k : order) {
    ev.parent_index.push_back(parent[k] < 0 ? -1 : new_pos[parent[k]]);
    ev.depth.push_back(depth[k]);
    ev.posts.push_back(std::move(posts[k]));
  }
  if (stats) {
    ++stats->events;
    stats->posts += ev.posts.size();
    stats->clamped_timestamps += clamped;
  }
  return ev;
}

namespace {

std::optional<PostKind> parse_kind(const json& j, std::size_t line) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_string()) throw ParseError("\"kind\" must be a string or null", line);
  const auto& s = j.get_ref<const std::string&>();
  if (s == "repost") return PostKind::repost;
  if (s == "reply") return PostKind::reply;
  if (s == "unknown") return PostKind::unknown;
  throw ParseError("unknown post kind '" + s + "'", line);
}

const char* kind_name(PostKind k) {
  switch (k) {
    case PostKind::repost: return "repost";
    case PostKind::reply: return "reply";
    case PostKind::unknown: return "unknown";
  }
  return "unknown";
}

Event parse_event_line(const std::string& text, std::size_t line,
                       LoadStats* stats) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("event must be a JSON object", line);

  auto eid = j.find("event_id");
  if (eid == j.end() || !eid->is_string()) {
    throw ParseError("missing string field \"event_id\"", line);
  }
  auto lab = j.find("label");
  if (lab == j.end() || !lab->is_number_integer() ||
      (lab->get<int>() != 0 && lab->get<int>() != 1)) {
    throw ParseError("\"label\" must be 0 or 1", line);
  }
  auto jp = j.find("posts");
  if (jp == j.end() || !jp->is_array()) {
    throw ParseError("missing array field \"posts\"", line);
  }

  std::vector<Post> posts;
  posts.reserve(jp->size());
  for (const json& p : *jp) {
    if (!p.is_object()) throw ParseError("post must be a JSON object", line);
    Post post;
    auto id = p.find("id");
    if (id == p.end() || !id->is_string()) {
      throw ParseError("post missing string field \"id\"", line);
    }
    post.id = id->get<std::string>();
    if (auto par = p.find("parent"); par != p.end() && !par->is_null()) {
      if (!par->is_string()) {
        throw ParseError("\"parent\" must be a string or null", line);
      }
      post.parent_id = par->get<std::string>();
    }
    auto t = p.find("t");
    if (t == p.end() || !t->is_number()) {
      throw ParseError("post '" + post.id + "' missing numeric field \"t\"", line);
    }
    post.timestamp = t->get<double>();
    if (auto tx = p.find("text"); tx != p.end() && !tx->is_null()) {
      if (!tx->is_string()) throw ParseError("\"text\" must be a string", line);
      post.text = tx->get<std::string>();
    }
    if (auto k = p.find("kind"); k != p.end()) post.kind = parse_kind(*k, line);
    posts.push_back(std::move(post));
  }
  return make_event(eid->get<std::string>(),
                    lab->get<int>() == 1 ? Label::rumor : Label::non_rumor,
                    std::move(posts), stats);
}

}  // namespace

std::vector<Event> parse_events(std::istream& in, LoadStats* stats) {
  std::vector<Event> events;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Event ev = parse_event_line(text, line, stats);
    if (!seen.insert(ev.event_id).second) {
      throw ValidationError(ev.event_id, "duplicate event id (line " +
                                             std::to_string(line) + ")");
    }
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<Event> load_events(const std::filesystem::path& path,
                               LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open event file '" + path.string() + "'");
  return parse_events(in, stats);
}

std::string event_to_json_line(const Event& event) {
  json posts = json::array();
  for (const Post& p : event.posts) {
    json jp;
    jp["id"] = p.id;
    jp["parent"] = p.parent_id ? json(*p.parent_id) : json(nullptr);
    jp["t"] = p.timestamp;
    jp["text"] = p.text;
    jp["kind"] = p.kind ? json(kind_name(*p.kind)) : json(nullptr);
    posts.push_back(std::move(jp));
  }
  json j;
  j["event_id"] = event.event_id;
  j["label"] = event.label_value();
  j["posts"] = std::move(posts);
  return j.dump();
}

void write_events(std::ostream& out, std::span<const Event> events) {
  for (const Event& e : events) out << event_to_json_line(e) << '\n';
}

void write_events(const std::filesystem::path& path,
                  std::span<const Event> events) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write event file '" + path.string() + "'");
  write_events(out, events);
}

const Event* find_event(std::span<const Event> events, const std::string& id) {
  for (const Event& e : events) {
    if (e.event_id == id) return &e;
  }
  return nullptr;
}

std::size_t FoldPlan::fold_of(const std::string& event_id) const {
  auto it = assignment.find(event_id);
  if (it == assignment.end()) throw Error("event '" + event_id + "' not in fold plan");
  return it->second;
}

std::vector<std::size_t> FoldPlan::members(std::span<const Event> events,
                                           std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (fold_of(events[i].event_id) == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement(std::span<const Event> events,
                                              std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (fold_of(events[i].event_id) != fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_folds(std::span<const Event> events, std::size_t n_folds,
                    std::uint64_t seed) {
  if (n_folds < 2) throw Error("make_folds: n_folds must be at least 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < events.size(); ++i) {
    by_class[events[i].label_value()].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < n_folds) {
      throw Error("make_folds: too few events per class (class " +
                  std::to_string(c) + " has " +
                  std::to_string(by_class[c].size()) + ", need at least " +
                  std::to_string(n_folds) + ")");
    }
  }
  FoldPlan plan;
  plan.n_folds = n_folds;
  Rng rng(seed);
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (std::size_t k = 0; k < members.size(); ++k) {
      plan.assignment[events[members[k]].event_id] = k % n_folds;
    }
  }
  return plan;
}

namespace {

Event subset(const Event& event, const std::vector<bool>& keep) {
  std::vector<Post> posts;
  for (std::size_t i = 0; i < event.posts.size(); ++i) {
    if (keep[i]) posts.push_back(event.posts[i]);
  }
  return make_event(event.event_id, event.label, std::move(posts));
}

}  // namespace

Event truncate_at_deadline(const Event& event, double deadline) {
  std::vector<bool> keep(event.posts.size());
  bool all = true;
  for (std::size_t i = 0; i < event.posts.size(); ++i) {
    keep[i] = i == 0 || event.offset(i) <= deadline;
    all = all && keep[i];
  }
  if (all) return event;
  return subset(event, keep);
}

Event cap_posts(const Event& event, std::size_t max_posts) {
  if (max_posts == 0 || event.posts.size() <= max_posts) return event;
  std::vector<bool> keep(event.posts.size(), false);
  for (std::size_t i = 0; i < max_posts; ++i) keep[i] = true;
  // Equal timestamps can order a child before its parent; drop any post whose
  // ancestor chain leaves the kept set.
  std::vector<std::size_t> by_depth(event.posts.size());
  std::iota(by_depth.begin(), by_depth.end(), 0);
  std::stable_sort(by_depth.begin(), by_depth.end(), [&](auto a, auto b) {
    return event.depth[a] < event.depth[b];
  });
  for (std::size_t i : by_depth) {
    int p = event.parent_index[i];
    if (keep[i] && p >= 0 && !keep[p]) keep[i] = false;
  }
  return subset(event, keep);
}

std::size_t count_label(std::span<const Event> events, Label label) {
  return static_cast<std::size_t>(std::count_if(
      events.begin(), events.end(), [&](const Event& e) { return e.label == label; }));
}

}  // namespace nmdps
