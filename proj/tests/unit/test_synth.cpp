#include <doctest.h>

#include "horo/sampling.hpp"
#include "horo/synth.hpp"

using namespace horo;

TEST_CASE("tree generation node and edge counts") {
  // depth 4, branching 4: 1 + 4 + 16 + 64 + 256 nodes.
  const TripleStore t44 = gen_tree({4, 4, DepthMode::per_level, 0});
  CHECK(t44.entity_count() == 341);
  CHECK(t44.edge_count() == 340);
  CHECK(t44.relation_count() == 4);

  const TripleStore t12 = gen_tree({1, 2, DepthMode::per_level, 0});
  CHECK(t12.entity_count() == 3);
  CHECK(t12.edge_count() == 2);

  const TripleStore single = gen_tree({3, 2, DepthMode::single, 0});
  CHECK(single.relation_count() == 1);
}

TEST_CASE("trees admit depth encoding by construction") {
  const TripleStore tree = gen_tree({4, 3, DepthMode::single, 0});
  const TripleStore encoded = depth_encode(tree, DepthMode::per_level);
  CHECK(encoded.relation_count() == 4);
}

TEST_CASE("tree size guard") {
  CHECK_THROWS_AS(gen_tree({12, 4, DepthMode::single, 0}), UsageError);
  CHECK_THROWS_AS(gen_tree({0, 2, DepthMode::single, 0}), UsageError);
}

TEST_CASE("generators are deterministic under seeds") {
  const TripleStore a = gen_overlap_kg(30, 3, 0.05, 42);
  const TripleStore b = gen_overlap_kg(30, 3, 0.05, 42);
  CHECK(a.triples() == b.triples());
  const TripleStore c = gen_overlap_kg(30, 3, 0.05, 43);
  CHECK(a.triples() != c.triples());
}

TEST_CASE("dense single-relation graph is complete with self loops") {
  const TripleStore kg = gen_overlap_kg(3, 1, 1.0, 7);
  CHECK(kg.edge_count() == 9);
}

TEST_CASE("overlap graphs always admit 2-way intersections") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TripleStore kg = gen_overlap_kg(25, 3, 0.015, seed);
    const SplitBundle bundle = split(kg, {1.0, 0.0, 0.0}, 1);
    const auto samples = sample_queries(bundle, StructureTag::i2, 3, seed, AnswerGraph::train);
    CHECK(samples.size() == 3);
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(gen_overlap_kg(1, 1, 0.5, 0), UsageError);
  CHECK_THROWS_AS(gen_overlap_kg(5, 1, 0.0, 0), UsageError);
  CHECK_THROWS_AS(gen_overlap_kg(5, 1, 1.5, 0), UsageError);
}
