#include <benchmark/benchmark.h>

#include "horo/model.hpp"
#include "horo/synth.hpp"

namespace {

using namespace horo;

struct ScoreFixture {
  TripleStore tree = gen_tree({4, 4, DepthMode::per_level, 0});
  ParameterStore store;
  ModelConfig cfg;
  DnfQuery query;

  ScoreFixture() {
    cfg.d = 16;
    store = ParameterStore(cfg.d, cfg.hidden_width(), tree.entity_count(),
                           tree.relation_count(), Curvature{});
    init_params(store, 7);
    query = to_dnf(QueryAst::intersect(
        {QueryAst::translate(QueryAst::translate(QueryAst::entity(0), 0), 1),
         QueryAst::translate(QueryAst::entity(1), 1)}));
  }
};

void BM_ScoreAllEntities(benchmark::State& state) {
  static ScoreFixture fx;
  for (auto _ : state) {
    const auto scores = score_all(fx.store, fx.cfg, fx.query);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() * fx.store.entity_count());
}
BENCHMARK(BM_ScoreAllEntities);

void BM_EmbedCompoundQuery(benchmark::State& state) {
  static ScoreFixture fx;
  for (auto _ : state) {
    const Hyperboloid box = embed_query(fx.store, fx.cfg, fx.query.branches[0]);
    benchmark::DoNotOptimize(box.lim.data());
  }
}
BENCHMARK(BM_EmbedCompoundQuery);

}  // namespace
