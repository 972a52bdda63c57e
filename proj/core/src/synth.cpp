#include "horo/synth.hpp"

namespace horo {

TripleStore gen_tree(const TreeSpec& spec) {
  if (spec.depth < 1 || spec.branching < 2)
    throw UsageError("gen_tree: depth >= 1 and branching >= 2 required");
  // Node count sum_{l=0..depth} b^l, guarded against runaway sizes.
  std::uint64_t nodes = 0;
  std::uint64_t level = 1;
  for (std::int32_t l = 0; l <= spec.depth; ++l) {
    nodes += level;
    level *= static_cast<std::uint64_t>(spec.branching);
    if (nodes > 1000000) throw UsageError("gen_tree: node count exceeds 1e6");
  }

  Vocab entities;
  Vocab relations;
  if (spec.relation_mode == DepthMode::single) {
    relations.intern("child");
  } else {
    for (std::int32_t d = 0; d < spec.depth; ++d) relations.intern("level" + std::to_string(d));
  }

  std::vector<Triple> triples;
  triples.reserve(nodes - 1);
  entities.intern("n0");
  std::vector<EntityId> frontier{0};
  std::int32_t next = 1;
  for (std::int32_t d = 0; d < spec.depth; ++d) {
    const RelationId rel = spec.relation_mode == DepthMode::single ? 0 : d;
    std::vector<EntityId> next_frontier;
    next_frontier.reserve(frontier.size() * spec.branching);
    for (EntityId parent : frontier) {
      for (std::int32_t b = 0; b < spec.branching; ++b) {
        const EntityId child = entities.intern("n" + std::to_string(next++));
        triples.push_back({parent, rel, child});
        next_frontier.push_back(child);
      }
    }
    frontier = std::move(next_frontier);
  }
  return TripleStore(std::move(entities), std::move(relations), std::move(triples));
}

TripleStore gen_overlap_kg(std::int32_t n, std::int32_t m, double density, std::uint64_t seed) {
  if (n < 2 || m < 1) throw UsageError("gen_overlap_kg: need >= 2 entities and >= 1 relation");
  if (density <= 0.0 || density > 1.0) throw UsageError("gen_overlap_kg: density in (0, 1]");

  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, "overlap_kg", static_cast<std::uint64_t>(attempt)));
    Vocab entities;
    Vocab relations;
    for (std::int32_t e = 0; e < n; ++e) entities.intern("e" + std::to_string(e));
    for (std::int32_t r = 0; r < m; ++r) relations.intern("r" + std::to_string(r));

    std::vector<Triple> triples;
    std::vector<std::int32_t> indegree(n, 0);
    for (std::int32_t h = 0; h < n; ++h)
      for (std::int32_t t = 0; t < n; ++t)
        for (std::int32_t r = 0; r < m; ++r)
          if (rng.next_double() < density) {
            triples.push_back({h, r, t});
            ++indegree[t];
          }
    if (triples.empty()) continue;
    // A 2-way intersection template needs a tail with two distinct in-edges.
    bool has_2i = false;
    for (std::int32_t t = 0; t < n && !has_2i; ++t) has_2i = indegree[t] >= 2;
    if (!has_2i) continue;
    return TripleStore(std::move(entities), std::move(relations), std::move(triples));
  }
  throw DataError("gen_overlap_kg: no intersection-capable graph after 100 attempts; "
                  "raise density or size");
}

}  // namespace horo
