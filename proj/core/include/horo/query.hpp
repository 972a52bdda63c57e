#pragma once

#include <set>
#include <string>
#include <vector>

#include "horo/triples.hpp"

namespace horo {

// Positive first-order existential query over a knowledge graph: anchors,
// relational translations, intersections and unions. Intersect/Union are
// n-ary (arity >= 2) and semantically order-insensitive.
struct QueryAst {
  enum class Kind { entity, translate, intersect, unite };

  Kind kind = Kind::entity;
  std::int32_t id = -1;  // entity id for entity nodes, relation id for translate
  std::vector<QueryAst> children;

  static QueryAst entity(EntityId e);
  static QueryAst translate(QueryAst child, RelationId r);
  static QueryAst intersect(std::vector<QueryAst> members);
  static QueryAst unite(std::vector<QueryAst> members);

  bool contains(Kind k) const;
  friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

// Benchmark query shapes: translations of depth 1..3, 2/3-way intersections
// of translated anchors, a raw-entity union, and the three compound forms
// (intersect-then-translate, translate-then-intersect, union-then-translate).
enum class StructureTag { t1, t2, t3, i2, i3, u2, ip, pi, up };

const char* to_string(StructureTag tag);
StructureTag structure_tag_from_string(const std::string& s);
inline constexpr int kStructureTagCount = 9;
StructureTag structure_tag_at(int index);  // index in canonical reporting order

// Text syntax: E(name), T(q, rel), I(q, q, ...), U(q, q, ...); whitespace
// insensitive. Ids are resolved against the vocabularies; unknown ids,
// syntax errors (reported with a byte offset) and arity violations throw.
QueryAst parse_query(const std::string& text, const Vocab& entities, const Vocab& relations);
std::string print_query(const QueryAst& q, const Vocab& entities, const Vocab& relations);

struct DnfQuery {
  std::vector<QueryAst> branches;  // union-free, canonically ordered
};

// Pushes every union to the top level by distributing translate/intersect
// over union children. Branch counts above 64 throw DataError.
DnfQuery to_dnf(const QueryAst& q);

// Canonical child ordering (sorted by structure) for deduplication.
QueryAst normalize(const QueryAst& q);

// Shape classification per the benchmark templates; throws DataError for
// shapes outside the nine templates.
StructureTag classify(const QueryAst& q);

// Exact set semantics by graph traversal; no embeddings involved.
std::set<EntityId> oracle_answers(const QueryAst& q, const TripleStore& kg);

}  // namespace horo
