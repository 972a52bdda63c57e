#include "horo/sampling.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace horo {

namespace {

// In-edge of `node`, uniform over its predecessor (head, relation) pairs.
// Returns false when the node has no predecessors.
bool pick_in_edge(const TripleStore& kg, EntityId node, Rng& rng, EntityId& head,
                  RelationId& rel) {
  const auto& preds = kg.predecessors(node);
  if (preds.empty()) return false;
  const auto& pick = preds[rng.next_below(preds.size())];
  head = pick.first;
  rel = pick.second;
  return true;
}

const Triple& pick_edge(const TripleStore& kg, Rng& rng) {
  return kg.triples()[rng.next_below(kg.edge_count())];
}

// One template instantiation by backwards walk from an answer node; returns
// false when the draw cannot be completed on this graph.
bool build_template(const TripleStore& kg,
                    const std::vector<std::vector<std::size_t>>& edges_by_rel, StructureTag tag,
                    Rng& rng, QueryAst& out) {
  switch (tag) {
    case StructureTag::t1: {
      const Triple& e = pick_edge(kg, rng);
      out = QueryAst::translate(QueryAst::entity(e.head), e.relation);
      return true;
    }
    case StructureTag::t2: {
      const Triple& e = pick_edge(kg, rng);
      EntityId h;
      RelationId r1;
      if (!pick_in_edge(kg, e.head, rng, h, r1)) return false;
      out = QueryAst::translate(QueryAst::translate(QueryAst::entity(h), r1), e.relation);
      return true;
    }
    case StructureTag::t3: {
      const Triple& e = pick_edge(kg, rng);
      EntityId m, h;
      RelationId r2, r1;
      if (!pick_in_edge(kg, e.head, rng, m, r2)) return false;
      if (!pick_in_edge(kg, m, rng, h, r1)) return false;
      out = QueryAst::translate(
          QueryAst::translate(QueryAst::translate(QueryAst::entity(h), r1), r2), e.relation);
      return true;
    }
    case StructureTag::i2:
    case StructureTag::i3: {
      const Triple& e = pick_edge(kg, rng);
      const int arity = tag == StructureTag::i2 ? 2 : 3;
      std::vector<QueryAst> members;
      members.push_back(QueryAst::translate(QueryAst::entity(e.head), e.relation));
      for (int i = 1; i < arity; ++i) {
        EntityId h;
        RelationId r;
        if (!pick_in_edge(kg, e.tail, rng, h, r)) return false;
        members.push_back(QueryAst::translate(QueryAst::entity(h), r));
      }
      out = QueryAst::intersect(std::move(members));
      return true;
    }
    case StructureTag::u2: {
      const EntityId x = static_cast<EntityId>(rng.next_below(kg.entity_count()));
      EntityId y = x;
      for (int i = 0; i < 16 && y == x; ++i)
        y = static_cast<EntityId>(rng.next_below(kg.entity_count()));
      out = QueryAst::unite({QueryAst::entity(x), QueryAst::entity(y)});
      return true;
    }
    case StructureTag::up: {
      const Triple& e1 = pick_edge(kg, rng);
      const auto& pool = edges_by_rel[e1.relation];
      const Triple& e2 = kg.triples()[pool[rng.next_below(pool.size())]];
      out = QueryAst::translate(
          QueryAst::unite({QueryAst::entity(e1.head), QueryAst::entity(e2.head)}), e1.relation);
      return true;
    }
    case StructureTag::ip: {
      const Triple& e = pick_edge(kg, rng);  // (w, r3, answer)
      EntityId h1, h2;
      RelationId r1, r2;
      if (!pick_in_edge(kg, e.head, rng, h1, r1)) return false;
      if (!pick_in_edge(kg, e.head, rng, h2, r2)) return false;
      out = QueryAst::translate(
          QueryAst::intersect({QueryAst::translate(QueryAst::entity(h1), r1),
                               QueryAst::translate(QueryAst::entity(h2), r2)}),
          e.relation);
      return true;
    }
    case StructureTag::pi: {
      const Triple& e = pick_edge(kg, rng);  // (m, r2, answer)
      EntityId h1, h2;
      RelationId r1, r3;
      if (!pick_in_edge(kg, e.head, rng, h1, r1)) return false;
      if (!pick_in_edge(kg, e.tail, rng, h2, r3)) return false;
      out = QueryAst::intersect(
          {QueryAst::translate(QueryAst::translate(QueryAst::entity(h1), r1), e.relation),
           QueryAst::translate(QueryAst::entity(h2), r3)});
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<QuerySample> sample_queries(const SplitBundle& bundle, StructureTag tag,
                                        std::int32_t count, std::uint64_t seed,
                                        AnswerGraph answer_graph, const SampleOptions& opts) {
  const TripleStore& graph =
      answer_graph == AnswerGraph::train ? bundle.train : bundle.full;
  if (graph.edge_count() == 0) throw DataError("sample_queries: empty graph");

  std::vector<std::vector<std::size_t>> edges_by_rel(graph.relation_count());
  for (std::size_t i = 0; i < graph.triples().size(); ++i)
    edges_by_rel[graph.triples()[i].relation].push_back(i);

  std::vector<QuerySample> out;
  out.reserve(count);
  std::uint64_t attempts = 0;
  const std::string stream = std::string("sample/") + to_string(tag);
  while (static_cast<std::int32_t>(out.size()) < count) {
    if (attempts >= 1000000 && out.size() < attempts / 1000)
      throw DataError(std::string("sample_queries: acceptance rate below 0.1% for structure ") +
                      to_string(tag));
    Rng rng(derive_seed(seed, stream, attempts));
    ++attempts;

    QueryAst ast;
    if (!build_template(graph, edges_by_rel, tag, rng, ast)) continue;
    std::set<EntityId> answers = oracle_answers(ast, graph);
    if (answers.empty() || static_cast<std::int32_t>(answers.size()) > opts.max_answers)
      continue;
    if (answer_graph == AnswerGraph::full && opts.require_hard_answer) {
      const std::set<EntityId> easy = oracle_answers(ast, bundle.train);
      if (std::includes(easy.begin(), easy.end(), answers.begin(), answers.end())) continue;
    }
    out.push_back({std::move(ast), tag, std::move(answers)});
  }
  return out;
}

std::vector<EntityId> sample_negatives(const std::set<EntityId>& answers, std::int32_t k,
                                       std::int32_t vocab_size, std::uint64_t seed) {
  if (static_cast<std::int32_t>(answers.size()) >= vocab_size)
    throw DataError("sample_negatives: answer set covers the whole vocabulary");
  Rng rng(seed);
  std::vector<EntityId> out;
  out.reserve(k);
  while (static_cast<std::int32_t>(out.size()) < k) {
    const auto e = static_cast<EntityId>(rng.next_below(vocab_size));
    if (answers.count(e)) continue;
    out.push_back(e);
  }
  return out;
}

void write_query_jsonl(const std::vector<QuerySample>& samples, const TripleStore& kg,
                       std::ostream& out) {
  for (const QuerySample& s : samples) {
    nlohmann::json line;
    line["structure"] = to_string(s.tag);
    line["query"] = print_query(s.ast, kg.entities(), kg.relations());
    nlohmann::json answers = nlohmann::json::array();
    for (EntityId e : s.answers) answers.push_back(kg.entities().name(e));
    line["answers"] = std::move(answers);
    out << line.dump() << '\n';
  }
}

void write_query_jsonl(const std::vector<QuerySample>& samples, const TripleStore& kg,
                       const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write query file: " + path);
  write_query_jsonl(samples, kg, file);
}

std::vector<QuerySample> read_query_jsonl(const std::string& path, const TripleStore& kg) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open query file: " + path);
  std::vector<QuerySample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    QuerySample s;
    s.tag = structure_tag_from_string(j.at("structure").get<std::string>());
    s.ast = parse_query(j.at("query").get<std::string>(), kg.entities(), kg.relations());
    for (const auto& name : j.at("answers")) {
      const auto id = kg.entities().find(name.get<std::string>());
      if (!id)
        throw DataError(path + ":" + std::to_string(line_no) + ": unknown entity '" +
                        name.get<std::string>() + "'");
      s.answers.insert(*id);
    }
    // The stored tag must agree with the shape whenever the shape is one of
    // the benchmark templates; other shapes keep their tag as-is.
    bool classifiable = true;
    StructureTag derived = s.tag;
    try {
      derived = classify(s.ast);
    } catch (const DataError&) {
      classifiable = false;
    }
    if (classifiable && derived != s.tag)
      throw DataError(path + ":" + std::to_string(line_no) + ": structure tag '" +
                      to_string(s.tag) + "' does not match query shape '" + to_string(derived) +
                      "'");
    out.push_back(std::move(s));
  }
  return out;
}

void validate_samples(const std::vector<QuerySample>& samples, const TripleStore& answer_graph) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].answers != oracle_answers(samples[i].ast, answer_graph))
      throw DataError("query sample " + std::to_string(i) +
                      ": stored answers disagree with graph traversal");
  }
}

}  // namespace horo
