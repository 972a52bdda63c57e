#pragma once

#include <set>
#include <vector>

#include "horo/triples.hpp"

namespace horo {

// Entities ordered by ascending score (closer = more relevant); ties broken
// by ascending entity id so reports are deterministic.
struct RankedOutput {
  std::vector<EntityId> ids;
  std::vector<double> scores;  // aligned, nondecreasing
  std::set<EntityId> answers;
};

RankedOutput rank_entities(const std::vector<double>& scores, std::set<EntityId> answers);

// Fraction of the top-k ranked ids that lie in the answer set.
double hits_at_k(const RankedOutput& output, std::int32_t k);

// (1/n) * sum over positions i of 1/i for every hit in the output — the
// as-published reading of MRR, normalized by output length.
double mrr_as_published(const RankedOutput& output);

// Conventional MRR: reciprocal rank of the first hit, 0 when there is none.
double mrr_standard(const RankedOutput& output);

}  // namespace horo
