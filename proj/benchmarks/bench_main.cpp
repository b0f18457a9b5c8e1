#include <benchmark/benchmark.h>

#include <vector>

#include "nmdps/autodiff.hpp"
#include "nmdps/model.hpp"
#include "nmdps/netblocks.hpp"
#include "nmdps/structpart.hpp"
#include "nmdps/synthgen.hpp"
#include "nmdps/textrep.hpp"
#include "nmdps/wlkernel.hpp"

using namespace nmdps;

namespace {

std::vector<Event> events(std::size_t n, std::size_t posts) {
  SynthSpec s;
  s.n_events = n;
  s.min_posts = posts;
  s.max_posts = posts;
  s.mode = SynthMode::both;
  return generate(s);
}

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.normal();
  return Tensor({r, c}, std::move(v));
}

}  // namespace

// Bidirectional GRU over a batch of 32 sequences of length T, hidden 64.
static void BM_BiGruForwardBackward(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  GruParams f = GruParams::init(32, 64, rng), b = GruParams::init(32, 64, rng);
  std::vector<Tensor> xs;
  for (std::size_t t = 0; t < T; ++t) xs.push_back(random_tensor(32, 32, rng));
  std::vector<std::vector<bool>> mask(T, std::vector<bool>(32, true));
  for (auto _ : state) {
    auto hs = bigru_forward(xs, mask, f, b);
    ad::backward(ad::sum(hs.back()));
    benchmark::DoNotOptimize(hs.back().values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T) * 32);
}
BENCHMARK(BM_BiGruForwardBackward)->Arg(10)->Arg(50)->Arg(100);

// CNN content path over n_max posts of d_w = 50 for a batch of 32 events.
static void BM_ContentForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  ContentParams p = ContentParams::init({5, 6, 7}, 30, 50, rng);
  Tensor x = random_tensor(32 * n, 50, rng);
  for (auto _ : state) {
    Tensor out = content_forward(x, 32, p, 3);
    benchmark::DoNotOptimize(out.values().data());
  }
}
BENCHMARK(BM_ContentForward)->Arg(32)->Arg(128);

static void BM_Featurize(benchmark::State& state) {
  auto ev = events(64, static_cast<std::size_t>(state.range(0)));
  WindowConfig c;
  for (auto _ : state) {
    for (const auto& e : ev) {
      EventFeatures f = structure_features(e, c);
      benchmark::DoNotOptimize(f.structure.data());
    }
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Featurize)->Arg(50)->Arg(500);

static void BM_WlKernel(benchmark::State& state) {
  auto ev = events(2, static_cast<std::size_t>(state.range(0)));
  LabeledGraph a = tree_graph(ev[0]), b = tree_graph(ev[1]);
  for (auto _ : state) benchmark::DoNotOptimize(wl_kernel(a, b, 3));
}
BENCHMARK(BM_WlKernel)->Arg(50)->Arg(500);

static void BM_PvDbowEpoch(benchmark::State& state) {
  std::vector<Document> docs;
  for (const auto& e : events(20, 40)) {
    for (const auto& p : e.posts) docs.emplace_back(e.event_id + "/" + p.id, tokenize(p.text));
  }
  PvDbowConfig c;
  c.epochs = 1;
  c.min_count = 1;
  for (auto _ : state) {
    PvDbowModel m = train_pv_dbow(docs, c);
    benchmark::DoNotOptimize(m.word_vectors().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs.size()));
}
BENCHMARK(BM_PvDbowEpoch);

BENCHMARK_MAIN();
