#include "nmdps/wlkernel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nmdps/error.hpp"
#include "nmdps/structpart.hpp"

namespace nmdps {

LabeledGraph::LabeledGraph(std::size_t n_nodes,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           std::vector<std::string> labels)
    : adj_(n_nodes), labels_(std::move(labels)) {
  if (labels_.size() != n_nodes) {
    throw Error("LabeledGraph: " + std::to_string(labels_.size()) + " labels for " +
                std::to_string(n_nodes) + " nodes");
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto [u, v] : edges) {
    if (u >= n_nodes || v >= n_nodes) throw Error("LabeledGraph: edge endpoint out of range");
    if (u == v) throw Error("LabeledGraph: self-loop at node " + std::to_string(u));
    if (!seen.insert({std::min(u, v), std::max(u, v)}).second) {
      throw Error("LabeledGraph: duplicate edge " + std::to_string(u) + "-" + std::to_string(v));
    }
    adj_[u].push_back(v);
    adj_[v].push_back(u);
  }
}

std::size_t LabeledGraph::edge_count() const {
  std::size_t deg = 0;
  for (const auto& a : adj_) deg += a.size();
  return deg / 2;
}

std::string to_string(NodeLabeling l) { return l == NodeLabeling::depth ? "depth" : "uniform"; }

NodeLabeling node_labeling_from_string(const std::string& s) {
  if (s == "depth") return NodeLabeling::depth;
  if (s == "uniform") return NodeLabeling::uniform;
  throw ConfigError("unknown node labeling '" + s + "' (expected depth or uniform)");
}

LabeledGraph tree_graph_prefix(const Event& event, std::size_t n, NodeLabeling labeling) {
  if (n == 0 || n > event.size()) throw Error("tree_graph_prefix: prefix length out of range");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = labeling == NodeLabeling::depth ? std::to_string(event.depth[i]) : "0";
    if (i == 0) continue;
    const auto parent = static_cast<std::size_t>(event.parent_index[i]);
    if (parent >= n) throw Error("tree_graph_prefix: prefix is not closed under parents");
    edges.emplace_back(parent, i);
  }
  return LabeledGraph(n, edges, std::move(labels));
}

LabeledGraph tree_graph(const Event& event, NodeLabeling labeling) {
  return tree_graph_prefix(event, event.size(), labeling);
}

namespace {

// Maps every distinct signature to its rank in sorted order.
std::vector<std::vector<std::uint32_t>> compress(
    const std::vector<std::vector<std::string>>& signatures) {
  std::vector<std::string> all;
  for (const auto& g : signatures) all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<std::vector<std::uint32_t>> out(signatures.size());
  for (std::size_t g = 0; g < signatures.size(); ++g) {
    out[g].reserve(signatures[g].size());
    for (const auto& s : signatures[g]) {
      auto it = std::lower_bound(all.begin(), all.end(), s);
      out[g].push_back(static_cast<std::uint32_t>(it - all.begin()));
    }
  }
  return out;
}

}  // namespace

std::vector<WlHistogram> wl_features(std::span<const LabeledGraph> graphs, std::size_t iterations) {
  for (const auto& g : graphs) {
    if (g.size() == 0) throw Error("wl_features: empty graph");
  }
  std::vector<std::vector<std::string>> sig(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) sig[g] = graphs[g].labels();
  std::vector<WlHistogram> hist(graphs.size());

  for (std::size_t round = 0;; ++round) {
    auto ids = compress(sig);
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      for (std::uint32_t id : ids[g]) hist[g][{round, id}] += 1.0;
    }
    if (round == iterations) break;
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const LabeledGraph& graph = graphs[g];
      for (std::size_t v = 0; v < graph.size(); ++v) {
        std::vector<std::uint32_t> nb;
        for (std::size_t u : graph.neighbors(v)) nb.push_back(ids[g][u]);
        std::sort(nb.begin(), nb.end());
        std::string s = std::to_string(ids[g][v]) + ":";
        for (std::size_t i = 0; i < nb.size(); ++i) {
          if (i > 0) s += ',';
          s += std::to_string(nb[i]);
        }
        sig[g][v] = std::move(s);
      }
    }
  }
  return hist;
}

double histogram_dot(const WlHistogram& a, const WlHistogram& b) {
  double s = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) ++ia;
    else if (ib->first < ia->first) ++ib;
    else {
      s += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return s;
}

double wl_kernel(const LabeledGraph& a, const LabeledGraph& b, std::size_t iterations) {
  const LabeledGraph pair[2] = {a, b};
  auto h = wl_features(pair, iterations);
  return histogram_dot(h[0], h[1]);
}

namespace {

double normalized(const WlHistogram& a, const WlHistogram& b) {
  return histogram_dot(a, b) / std::sqrt(histogram_dot(a, a) * histogram_dot(b, b));
}

}  // namespace

double normalized_similarity(const LabeledGraph& a, const LabeledGraph& b,
                             std::size_t iterations) {
  const LabeledGraph pair[2] = {a, b};
  auto h = wl_features(pair, iterations);
  return normalized(h[0], h[1]);
}

std::vector<double> similarity_trace(const Event& a, const Event& b, double unit_seconds,
                                     std::size_t iterations, NodeLabeling labeling) {
  if (!(unit_seconds > 0.0)) throw Error("similarity_trace: unit_seconds must be positive");
  auto last_window = [&](const Event& e) {
    return static_cast<std::size_t>(std::floor(e.offset(e.size() - 1) / unit_seconds)) + 1;
  };
  const std::size_t W = std::max(last_window(a), last_window(b));
  // Posts are in time order, so the tree up to window t is a prefix.
  auto prefix_len = [&](const Event& e, std::size_t t) {
    std::size_t n = 1;
    while (n < e.size() && e.offset(n) < static_cast<double>(t) * unit_seconds) ++n;
    return n;
  };
  std::vector<double> trace;
  trace.reserve(W + 1);
  for (std::size_t t = 1; t <= W; ++t) {
    trace.push_back(normalized_similarity(tree_graph_prefix(a, prefix_len(a, t), labeling),
                                          tree_graph_prefix(b, prefix_len(b, t), labeling),
                                          iterations));
  }
  trace.push_back(normalized_similarity(tree_graph(a, labeling), tree_graph(b, labeling),
                                        iterations));
  return trace;
}

WlBaselineResult wl_nearest_neighbor_cv(std::span<const Event> events, std::size_t n_folds,
                                        std::uint64_t seed, std::size_t iterations,
                                        NodeLabeling labeling) {
  FoldPlan plan = make_folds(events, n_folds, seed);
  std::vector<LabeledGraph> graphs;
  graphs.reserve(events.size());
  for (const Event& e : events) graphs.push_back(tree_graph(e, labeling));
  const auto hist = wl_features(graphs, iterations);
  std::vector<double> self(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) self[i] = histogram_dot(hist[i], hist[i]);

  WlBaselineResult result;
  std::vector<MetricsReport> folds;
  for (std::size_t f = 0; f < n_folds; ++f) {
    const auto test = plan.members(events, f);
    const auto train = plan.complement(events, f);
    std::vector<Prediction> fold_preds;
    for (std::size_t i : test) {
      std::size_t best = train.front();
      double best_sim = -1.0;
      for (std::size_t j : train) {
        const double s = histogram_dot(hist[i], hist[j]) / std::sqrt(self[i] * self[j]);
        if (s > best_sim) {
          best_sim = s;
          best = j;
        }
      }
      const int y = events[best].label_value();
      fold_preds.push_back({events[i].event_id, static_cast<double>(y), events[i].label_value()});
    }
    folds.push_back(evaluate(fold_preds));
    result.predictions.insert(result.predictions.end(), fold_preds.begin(), fold_preds.end());
  }
  result.report = aggregate_folds(std::move(folds));
  return result;
}

}  // namespace nmdps
