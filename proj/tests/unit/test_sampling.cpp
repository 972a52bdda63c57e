#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "horo/sampling.hpp"
#include "horo/synth.hpp"

using namespace horo;

namespace {

SplitBundle all_train(const TripleStore& kg) { return split(kg, {1.0, 0.0, 0.0}, 1); }

TripleStore two_triple_fixture() {
  Vocab entities;
  Vocab relations;
  for (const char* n : {"a", "b", "c"}) entities.intern(n);
  relations.intern("r");
  return TripleStore(std::move(entities), std::move(relations), {{0, 0, 1}, {0, 0, 2}});
}

}  // namespace

TEST_CASE("the two-triple fixture admits exactly one 1t query") {
  const SplitBundle bundle = all_train(two_triple_fixture());
  const auto samples = sample_queries(bundle, StructureTag::t1, 5, 9, AnswerGraph::train);
  REQUIRE(samples.size() == 5);
  for (const QuerySample& s : samples) {
    CHECK(s.ast == QueryAst::translate(QueryAst::entity(0), 0));
    CHECK(s.answers == std::set<EntityId>{1, 2});
    CHECK(s.tag == StructureTag::t1);
  }
}

TEST_CASE("count zero yields an empty sequence") {
  const SplitBundle bundle = all_train(two_triple_fixture());
  CHECK(sample_queries(bundle, StructureTag::t1, 0, 9, AnswerGraph::train).empty());
}

TEST_CASE("raw-entity union template") {
  const SplitBundle bundle = all_train(two_triple_fixture());
  const auto samples = sample_queries(bundle, StructureTag::u2, 20, 3, AnswerGraph::train);
  for (const QuerySample& s : samples) {
    REQUIRE(s.ast.kind == QueryAst::Kind::unite);
    REQUIRE(s.ast.children.size() == 2);
    std::set<EntityId> expect;
    for (const QueryAst& c : s.ast.children) {
      CHECK(c.kind == QueryAst::Kind::entity);
      expect.insert(c.id);
    }
    CHECK(s.answers == expect);
  }
}

TEST_CASE("every structure is sampleable on an overlapping graph") {
  const TripleStore kg = gen_overlap_kg(50, 5, 0.02, 11);
  const SplitBundle bundle = all_train(kg);
  for (int i = 0; i < kStructureTagCount; ++i) {
    const StructureTag tag = structure_tag_at(i);
    const auto samples = sample_queries(bundle, tag, 25, 5, AnswerGraph::train);
    REQUIRE(samples.size() == 25);
    for (const QuerySample& s : samples) {
      CHECK(s.tag == tag);
      CHECK(classify(s.ast) == tag);
      CHECK(!s.answers.empty());
      CHECK(static_cast<std::int32_t>(s.answers.size()) <= 100);
      // The stored answers always match a fresh traversal.
      CHECK(s.answers == oracle_answers(s.ast, bundle.train));
    }
  }
}

TEST_CASE("every structure is sampleable on a hierarchy") {
  // Trees have single-parent nodes, so intersections degenerate to repeated
  // anchors; sampling must still succeed for all nine shapes.
  const TripleStore tree = gen_tree({4, 4, DepthMode::per_level, 0});
  const SplitBundle bundle = all_train(tree);
  for (int i = 0; i < kStructureTagCount; ++i) {
    const StructureTag tag = structure_tag_at(i);
    const auto samples = sample_queries(bundle, tag, 10, 5, AnswerGraph::train);
    CHECK(samples.size() == 10);
  }
}

TEST_CASE("sampling is deterministic under the seed") {
  const TripleStore kg = gen_overlap_kg(30, 3, 0.03, 2);
  const SplitBundle bundle = all_train(kg);
  const auto a = sample_queries(bundle, StructureTag::i2, 50, 77, AnswerGraph::train);
  const auto b = sample_queries(bundle, StructureTag::i2, 50, 77, AnswerGraph::train);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ast == b[i].ast);
    CHECK(a[i].answers == b[i].answers);
  }
}

TEST_CASE("full-graph sampling requires a held-out answer") {
  const TripleStore kg = gen_overlap_kg(40, 3, 0.05, 8);
  const SplitBundle bundle = split(kg, {}, 13);
  SampleOptions opts;
  const auto samples = sample_queries(bundle, StructureTag::t1, 50, 5, AnswerGraph::full, opts);
  for (const QuerySample& s : samples) {
    CHECK(s.answers == oracle_answers(s.ast, bundle.full));
    const auto easy = oracle_answers(s.ast, bundle.train);
    bool has_hard = false;
    for (EntityId e : s.answers) has_hard = has_hard || !easy.count(e);
    CHECK(has_hard);
  }
}

TEST_CASE("negative sampling avoids the answers") {
  Rng seed_rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    std::set<EntityId> answers;
    Rng rng(rep);
    const std::int32_t vocab = 50;
    while (answers.size() < 10) answers.insert(static_cast<EntityId>(rng.next_below(vocab)));
    const auto negs = sample_negatives(answers, 100, vocab, seed_rng.next_u64());
    CHECK(negs.size() == 100);
    for (EntityId e : negs) CHECK(answers.count(e) == 0);
  }
}

TEST_CASE("negatives collapse to the single non-answer entity") {
  std::set<EntityId> answers;
  for (EntityId e = 0; e < 9; ++e) answers.insert(e);
  const auto negs = sample_negatives(answers, 16, 10, 5);
  for (EntityId e : negs) CHECK(e == 9);
  CHECK_THROWS_AS(sample_negatives(answers, 4, 9, 5), DataError);
}

TEST_CASE("query jsonl round trip validates answers and tags") {
  const TripleStore kg = gen_overlap_kg(30, 3, 0.03, 21);
  const SplitBundle bundle = all_train(kg);
  std::vector<QuerySample> samples;
  for (StructureTag tag : {StructureTag::t1, StructureTag::u2, StructureTag::pi}) {
    auto s = sample_queries(bundle, tag, 10, 3, AnswerGraph::train);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  const std::string path = "/tmp/horo_queries_test.jsonl";
  write_query_jsonl(samples, kg, path);

  const auto loaded = read_query_jsonl(path, kg);
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].ast == samples[i].ast);
    CHECK(loaded[i].tag == samples[i].tag);
    CHECK(loaded[i].answers == samples[i].answers);
  }
  validate_samples(loaded, bundle.train);

  // Writing twice produces identical bytes.
  const std::string path2 = "/tmp/horo_queries_test2.jsonl";
  write_query_jsonl(samples, kg, path2);
  std::ifstream f1(path), f2(path2);
  const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  CHECK(c1.find("\r") == std::string::npos);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("hopeless structures trip the acceptance-rate guard") {
  // Every 1t query on this graph has two answers; with max_answers = 1 no
  // draw can ever be accepted and the sampler must name the structure.
  const SplitBundle bundle = all_train(two_triple_fixture());
  SampleOptions opts;
  opts.max_answers = 1;
  try {
    sample_queries(bundle, StructureTag::t1, 1, 3, AnswerGraph::train, opts);
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("1t") != std::string::npos);
  }
}

TEST_CASE("single-mode encoding collapses every sampled relation to zero") {
  const TripleStore tree = depth_encode(gen_tree({3, 2, DepthMode::per_level, 0}),
                                        DepthMode::single);
  const SplitBundle bundle = all_train(tree);
  for (StructureTag tag : {StructureTag::t2, StructureTag::pi}) {
    for (const QuerySample& s : sample_queries(bundle, tag, 10, 4, AnswerGraph::train)) {
      // Walk the AST: all translate nodes must use relation id 0.
      std::vector<const QueryAst*> stack{&s.ast};
      while (!stack.empty()) {
        const QueryAst* q = stack.back();
        stack.pop_back();
        if (q->kind == QueryAst::Kind::translate) CHECK(q->id == 0);
        for (const QueryAst& c : q->children) stack.push_back(&c);
      }
    }
  }
}

TEST_CASE("validation catches answer drift") {
  const TripleStore kg = two_triple_fixture();
  QuerySample s;
  s.ast = QueryAst::translate(QueryAst::entity(0), 0);
  s.tag = StructureTag::t1;
  s.answers = {1};  // missing entity 2
  CHECK_THROWS_AS(validate_samples({s}, kg), DataError);
}
