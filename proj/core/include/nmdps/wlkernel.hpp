#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmdps/dataset.hpp"
#include "nmdps/metrics.hpp"

namespace nmdps {

// Simple undirected graph with one string label per node.
class LabeledGraph {
 public:
  LabeledGraph() = default;
  // Throws on self-loops, duplicate edges, out-of-range endpoints, or a label
  // count that differs from n_nodes.
  LabeledGraph(std::size_t n_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
               std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_.at(v); }
  std::size_t edge_count() const;

 private:
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::string> labels_;
};

enum class NodeLabeling { depth, uniform };

std::string to_string(NodeLabeling l);
NodeLabeling node_labeling_from_string(const std::string& s);

// Propagation tree of the event as a graph; node i is post i.
LabeledGraph tree_graph(const Event& event, NodeLabeling labeling = NodeLabeling::depth);
// Same, restricted to the first n posts (n >= 1). Every time-threshold prefix
// is closed under parents; other prefixes may not be and are rejected.
LabeledGraph tree_graph_prefix(const Event& event, std::size_t n,
                               NodeLabeling labeling = NodeLabeling::depth);

// Sparse feature map: (round, compressed label) -> count.
using WlHistogram = std::map<std::pair<std::size_t, std::uint32_t>, double>;

// Refines every graph with one shared label dictionary so that histograms of
// different graphs are comparable. Compressed labels are assigned in sorted
// order of their signatures, which makes the result independent of the order
// of nodes and of graphs.
std::vector<WlHistogram> wl_features(std::span<const LabeledGraph> graphs, std::size_t iterations);

double histogram_dot(const WlHistogram& a, const WlHistogram& b);

double wl_kernel(const LabeledGraph& a, const LabeledGraph& b, std::size_t iterations);
double normalized_similarity(const LabeledGraph& a, const LabeledGraph& b,
                             std::size_t iterations);

// Entries 1..W compare the trees made of posts inside windows 1..t; the last
// entry compares the complete trees. W is the larger last-occupied window of
// the two events.
std::vector<double> similarity_trace(const Event& a, const Event& b, double unit_seconds,
                                     std::size_t iterations,
                                     NodeLabeling labeling = NodeLabeling::depth);

// 1-nearest-neighbour classifier on final trees: each test event takes the
// label of the training event with the highest normalized similarity (ties go
// to the earlier training event). Folds come from make_folds(seed).
struct WlBaselineResult {
  MetricsReport report;
  std::vector<Prediction> predictions;
};

WlBaselineResult wl_nearest_neighbor_cv(std::span<const Event> events, std::size_t n_folds,
                                        std::uint64_t seed, std::size_t iterations = 3,
                                        NodeLabeling labeling = NodeLabeling::depth);

}  // namespace nmdps
