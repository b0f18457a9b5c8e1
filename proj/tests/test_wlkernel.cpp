#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nmdps/error.hpp"
#include "nmdps/wlkernel.hpp"
#include "support.hpp"
#include "wl_oracle.hpp"

using namespace nmdps;
using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

Event star(int leaves) {
  std::vector<test::P> ps{{"r", "", 0}};
  for (int i = 0; i < leaves; ++i) ps.push_back({"l" + std::to_string(i), "r", double(1 + i)});
  return test::event("star", 0, ps);
}

Event chain(int n) {
  std::vector<test::P> ps{{"c0", "", 0}};
  for (int i = 1; i < n; ++i) ps.push_back({"c" + std::to_string(i), "c" + std::to_string(i - 1), double(i)});
  return test::event("chain", 1, ps);
}

}  // namespace

TEST_SUITE("wlkernel") {

TEST_CASE("graph validation") {
  CHECK_THROWS_AS(LabeledGraph(2, Edges{{0, 0}}, {"a", "b"}), Error);
  CHECK_THROWS_AS(LabeledGraph(2, Edges{{0, 1}, {1, 0}}, {"a", "b"}), Error);
  CHECK_THROWS_AS(LabeledGraph(2, Edges{{0, 2}}, {"a", "b"}), Error);
  CHECK_THROWS_AS(LabeledGraph(2, Edges{}, {"a"}), Error);
  CHECK(LabeledGraph(3, Edges{{0, 1}, {1, 2}}, {"a", "b", "c"}).edge_count() == 2);
}

TEST_CASE("hand-computed kernels") {
  // Star with two leaves versus a three-node chain. Depth labels {0,1,1} and
  // {0,1,2} share 1*1 + 2*1 = 3 at round 0 and nothing later.
  LabeledGraph s = tree_graph(star(2)), c = tree_graph(chain(3));
  for (std::size_t h : {0, 1, 2, 3}) CHECK(wl_kernel(s, c, h) == 3.0);
  // Unrooted, both are the path on three nodes: 9 + 5 + 5 per round.
  LabeledGraph su = tree_graph(star(2), NodeLabeling::uniform);
  LabeledGraph cu = tree_graph(chain(3), NodeLabeling::uniform);
  CHECK(wl_kernel(su, cu, 0) == 9.0);
  CHECK(wl_kernel(su, cu, 2) == 19.0);
  CHECK(normalized_similarity(su, cu, 3) == doctest::Approx(1.0));
  // Star with three leaves versus the four-node chain.
  CHECK(wl_kernel(tree_graph(star(3)), tree_graph(chain(4)), 2) == 4.0);
  CHECK(wl_kernel(tree_graph(star(3), NodeLabeling::uniform),
                  tree_graph(chain(4), NodeLabeling::uniform), 2) == 22.0);
}

TEST_CASE("compressed refinement matches the uncompressed oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Event a = test::random_event(rng, "a", 15), b = test::random_event(rng, "b", 15);
    for (NodeLabeling l : {NodeLabeling::depth, NodeLabeling::uniform}) {
      LabeledGraph ga = tree_graph(a, l), gb = tree_graph(b, l);
      const std::size_t h = rng.below(4);
      CHECK(wl_kernel(ga, gb, h) == test::brute_wl_kernel(ga, gb, h));
    }
  }
}

TEST_CASE("similarity properties") {
  Rng rng(2);
  LabeledGraph one(1, {}, {"0"}), other(1, {}, {"0"});
  CHECK(normalized_similarity(one, other, 3) == doctest::Approx(1.0));
  LabeledGraph x(2, Edges{{0, 1}}, {"a", "b"}), y(2, Edges{{0, 1}}, {"c", "d"});
  CHECK(normalized_similarity(x, y, 2) == 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    Event a = test::random_event(rng, "a", 30), b = test::random_event(rng, "b", 30);
    LabeledGraph ga = tree_graph(a), gb = tree_graph(b);
    const double sab = normalized_similarity(ga, gb, 3);
    CHECK(sab == doctest::Approx(normalized_similarity(gb, ga, 3)));
    CHECK(normalized_similarity(ga, ga, 3) == doctest::Approx(1.0));
    CHECK(sab >= 0.0);
    CHECK(sab <= 1.0 + 1e-12);
  }
}

TEST_CASE("kernel is invariant to node relabeling") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Event a = test::random_event(rng, "a", 25);
    std::vector<std::size_t> perm(a.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    Edges e, ep;
    std::vector<std::string> lab(a.size()), labp(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      lab[i] = labp[perm[i]] = std::to_string(a.depth[i]);
      if (i > 0) {
        const auto p = static_cast<std::size_t>(a.parent_index[i]);
        e.emplace_back(p, i);
        ep.emplace_back(perm[p], perm[i]);
      }
    }
    LabeledGraph g(a.size(), e, lab), gp(a.size(), ep, labp);
    CHECK(wl_kernel(g, g, 3) == wl_kernel(gp, gp, 3));
    CHECK(normalized_similarity(g, gp, 3) == doctest::Approx(1.0));
  }
}

TEST_CASE("more iterations never raise similarity of distinct trees above one") {
  Event a = star(5), b = chain(6);
  double prev = 2.0;
  for (std::size_t h = 0; h < 5; ++h) {
    const double s = normalized_similarity(tree_graph(a), tree_graph(b), h);
    CHECK(s <= prev + 1e-12);
    prev = s;
  }
}

TEST_CASE("similarity trace over windows") {
  // Same final tree, different timing.
  Event fast = test::event("f", 1, {{"r", "", 0}, {"a", "r", 10}, {"b", "a", 20}, {"c", "r", 30}});
  Event slow = test::event("s", 0, {{"r", "", 0}, {"a", "r", 10}, {"b", "a", 2500}, {"c", "r", 4000}});
  auto tr = similarity_trace(fast, slow, 1200, 3);
  REQUIRE(tr.size() == 5);  // windows 1..4 plus the final tree
  CHECK(tr.back() == doctest::Approx(1.0));
  CHECK(tr[0] < 1.0);
  CHECK(tr[3] == doctest::Approx(1.0));
  CHECK_THROWS_AS(similarity_trace(fast, slow, 0, 3), Error);
}

TEST_CASE("prefixes must be closed under parents") {
  // b replies to a at the same second but sorts first by id.
  Event e = test::event("e", 0, {{"r", "", 0}, {"z", "r", 5}, {"b", "z", 5}});
  CHECK(e.posts[1].id == "b");
  CHECK_THROWS_AS(tree_graph_prefix(e, 2), Error);
  CHECK(tree_graph_prefix(e, 3).size() == 3);
}

TEST_CASE("nearest-neighbour baseline separates different shapes") {
  std::vector<Event> events;
  for (int i = 0; i < 10; ++i) {
    Event s = star(4 + i % 3);
    s.event_id = "s" + std::to_string(i);
    s.label = Label::non_rumor;
    events.push_back(s);
    Event c = chain(5 + i % 3);
    c.event_id = "c" + std::to_string(i);
    c.label = Label::rumor;
    events.push_back(c);
  }
  auto r = wl_nearest_neighbor_cv(events, 5, 1);
  CHECK(r.predictions.size() == events.size());
  CHECK(r.report.accuracy == 1.0);
}

}  // TEST_SUITE
