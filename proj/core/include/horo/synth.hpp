#pragma once

#include "horo/triples.hpp"

namespace horo {

struct TreeSpec {
  std::int32_t depth = 4;
  std::int32_t branching = 4;
  DepthMode relation_mode = DepthMode::per_level;
  std::uint64_t seed = 0;
};

// Rooted b-ary tree of the given depth as parent -> child triples. Node
// names are n0 (root), n1, ... in breadth-first order; relations are either
// a single "child" or one "level<k>" per parent depth.
TripleStore gen_tree(const TreeSpec& spec);

// Random multi-relational digraph: each (head, tail, relation) cell drawn
// independently with probability `density` (self-loops included). Resampled
// until some tail has two in-edges, so 2-way intersection templates exist.
TripleStore gen_overlap_kg(std::int32_t entities, std::int32_t relations, double density,
                           std::uint64_t seed);

}  // namespace horo
