#include <benchmark/benchmark.h>

#include "horo/optim.hpp"
#include "horo/sampling.hpp"
#include "horo/synth.hpp"

namespace {

using namespace horo;

// One full optimizer step over a training batch: gradient accumulation via
// the tape plus the manifold-aware parameter update.
void BM_TrainBatch(benchmark::State& state) {
  const TripleStore tree = gen_tree({4, 4, DepthMode::per_level, 0});
  const SplitBundle bundle = split(tree, {1.0, 0.0, 0.0}, 1);
  ModelConfig cfg;
  cfg.d = 16;
  cfg.negatives = static_cast<std::int32_t>(state.range(0));
  ParameterStore store(cfg.d, cfg.hidden_width(), tree.entity_count(), tree.relation_count(),
                       Curvature{});
  init_params(store, 3);
  OptimState optim;
  optim.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());

  const auto samples = sample_queries(bundle, StructureTag::pi, 128, 5, AnswerGraph::train);
  std::vector<DnfQuery> dnf;
  for (const auto& s : samples) dnf.push_back(to_dnf(s.ast));
  std::vector<TrainPair> pairs;
  Rng rng(9);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    TrainPair p;
    p.query = &dnf[i];
    p.positive = *samples[i].answers.begin();
    p.negatives =
        sample_negatives(samples[i].answers, cfg.negatives, tree.entity_count(), rng.next_u64());
    pairs.push_back(std::move(p));
  }

  for (auto _ : state) {
    grads.zero();
    benchmark::DoNotOptimize(batch_loss_and_grad(store, cfg, pairs, grads, 1));
    optim_step(store, grads, optim);
  }
  state.SetItemsProcessed(state.iterations() * pairs.size());
}
BENCHMARK(BM_TrainBatch)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
