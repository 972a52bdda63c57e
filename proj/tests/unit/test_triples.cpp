#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

#include "horo/synth.hpp"
#include "horo/triples.hpp"

using namespace horo;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = "/tmp/horo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
           ".tsv";
    std::ofstream f(path, std::ios::binary);
    f << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("loading triples") {
  TempFile file("a\tr\tb\na\tr\tc\n");
  const TripleStore kg = load_tsv(file.path);
  CHECK(kg.entity_count() == 3);
  CHECK(kg.relation_count() == 1);
  CHECK(kg.successors(0, 0) == std::vector<EntityId>{1, 2});
  CHECK(kg.has_edge(0, 0, 1));
  CHECK_FALSE(kg.has_edge(1, 0, 0));
}

TEST_CASE("duplicate triples are dropped and counted") {
  TempFile file("a\tr\tb\na\tr\tb\na\tr\tc\n");
  LoadStats stats;
  const TripleStore kg = load_tsv(file.path, &stats);
  CHECK(stats.duplicate_count == 1);
  CHECK(kg.edge_count() == 2);
}

TEST_CASE("load errors") {
  TempFile bad("a b\n");
  CHECK_THROWS_AS(load_tsv(bad.path), DataError);
  try {
    load_tsv(bad.path);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);  // line number
  }
  TempFile empty("# only comments\n");
  CHECK_THROWS_AS(load_tsv(empty.path), DataError);
  CHECK_THROWS_AS(load_tsv("/nonexistent/file.tsv"), DataError);
}

TEST_CASE("comments and blank lines are skipped") {
  TempFile file("# header\n\na\tr\tb\n");
  CHECK(load_tsv(file.path).edge_count() == 1);
}

TEST_CASE("splitting is exact and deterministic") {
  const TripleStore kg = gen_overlap_kg(20, 2, 0.25, 7);
  // Exact ratio arithmetic on a 100-edge multiple is easiest to see with a
  // graph trimmed to 100 edges.
  std::vector<Triple> triples(kg.triples().begin(),
                              kg.triples().begin() + std::min<std::size_t>(100, kg.edge_count()));
  REQUIRE(triples.size() == 100);
  const TripleStore kg100(kg.entities(), kg.relations(), triples);

  const SplitBundle a = split(kg100, {}, 42);
  CHECK(a.train.edge_count() == 75);
  CHECK(a.valid.edge_count() == 10);
  CHECK(a.test.edge_count() == 15);
  CHECK(a.full.edge_count() == 100);

  const SplitBundle b = split(kg100, {}, 42);
  CHECK(a.train.triples() == b.train.triples());
  CHECK(a.valid.triples() == b.valid.triples());
  CHECK(a.test.triples() == b.test.triples());

  // Edge sets are disjoint and cover the source.
  std::set<std::tuple<int, int, int>> seen;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (const Triple& t : part->triples())
      CHECK(seen.insert({t.head, t.relation, t.tail}).second);
  CHECK(seen.size() == 100);

  // Every entity in valid/test appears in some train edge.
  std::set<EntityId> train_entities;
  for (const Triple& t : a.train.triples()) {
    train_entities.insert(t.head);
    train_entities.insert(t.tail);
  }
  for (const auto* part : {&a.valid, &a.test})
    for (const Triple& t : part->triples()) {
      CHECK(train_entities.count(t.head));
      CHECK(train_entities.count(t.tail));
    }
}

TEST_CASE("degenerate all-train split") {
  const TripleStore kg = gen_tree({3, 2, DepthMode::per_level, 0});
  const SplitBundle b = split(kg, {1.0, 0.0, 0.0}, 1);
  CHECK(b.train.edge_count() == kg.edge_count());
  CHECK(b.valid.edge_count() == 0);
  CHECK(b.test.edge_count() == 0);
}

TEST_CASE("leaf-heavy hierarchies cannot satisfy the coverage constraint") {
  // Every leaf edge is its leaf's only appearance, so any nontrivial holdout
  // fails and the error suggests changing the ratios.
  const TripleStore tree = gen_tree({4, 4, DepthMode::per_level, 0});
  try {
    split(tree, {}, 3);
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ratio") != std::string::npos);
  }
}

TEST_CASE("split ratio validation") {
  const TripleStore kg = gen_tree({2, 2, DepthMode::single, 0});
  CHECK_THROWS_AS(split(kg, {0.5, 0.2, 0.2}, 1), UsageError);
  CHECK_THROWS_AS(split(kg, {-0.1, 0.6, 0.5}, 1), UsageError);
}

TEST_CASE("depth encodings") {
  const TripleStore tree = gen_tree({3, 2, DepthMode::per_level, 0});
  CHECK(tree.relation_count() == 3);

  const TripleStore single = depth_encode(tree, DepthMode::single);
  CHECK(single.relation_count() == 1);
  CHECK(single.edge_count() == tree.edge_count());

  const TripleStore levels = depth_encode(single, DepthMode::per_level);
  CHECK(levels.relation_count() == 3);
  // Root edges carry relation 0.
  for (const Triple& t : levels.triples())
    if (t.head == 0) CHECK(t.relation == 0);
}

TEST_CASE("depth encoding rejects cycles") {
  Vocab entities;
  Vocab relations;
  for (const char* n : {"a", "b", "c"}) entities.intern(n);
  relations.intern("r");
  const TripleStore cyclic(entities, relations, {{0, 0, 1}, {1, 0, 2}, {2, 0, 0}});
  CHECK_THROWS_AS(depth_encode(cyclic, DepthMode::per_level), DataError);

  // Conflicting depths: a -> b, a -> c, b -> c gives c two different depths.
  const TripleStore dag(entities, relations, {{0, 0, 1}, {0, 0, 2}, {1, 0, 2}});
  CHECK_THROWS_AS(depth_encode(dag, DepthMode::per_level), DataError);
}

TEST_CASE("tsv round trip") {
  const TripleStore tree = gen_tree({3, 3, DepthMode::per_level, 0});
  TempFile file("");
  save_tsv(tree, file.path);
  const TripleStore loaded = load_tsv(file.path);
  CHECK(loaded.edge_count() == tree.edge_count());
  CHECK(loaded.entity_count() == tree.entity_count());
  CHECK(loaded.relation_count() == tree.relation_count());
  CHECK(loaded.triples() == tree.triples());
}
