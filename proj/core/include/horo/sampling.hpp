#pragma once

#include "horo/query.hpp"
#include "horo/triples.hpp"

namespace horo {

struct QuerySample {
  QueryAst ast;
  StructureTag tag;
  std::set<EntityId> answers;
};

enum class AnswerGraph { train, full };

struct SampleOptions {
  std::int32_t max_answers = 100;
  // For full-graph sampling: require at least one answer that is not
  // derivable from train edges alone (the query exercises held-out edges).
  bool require_hard_answer = true;
};

// Rejection sampling of benchmark-shaped queries. Anchors and relations are
// drawn backwards from answer nodes on the answer graph, so acceptance stays
// high even on sparse hierarchies (anchors may coincide there). Throws
// DataError naming the structure when acceptance falls below 0.1% over 1e6
// attempts.
std::vector<QuerySample> sample_queries(const SplitBundle& bundle, StructureTag tag,
                                        std::int32_t count, std::uint64_t seed,
                                        AnswerGraph answer_graph,
                                        const SampleOptions& opts = {});

// k uniform draws over entities outside the answer set (repetitions across
// draws permitted). Throws when the vocabulary has no non-answer entity.
std::vector<EntityId> sample_negatives(const std::set<EntityId>& answers, std::int32_t k,
                                       std::int32_t vocab_size, std::uint64_t seed);

// Query JSONL: {"answers":[...],"query":"...","structure":"..."} per line,
// UTF-8, LF-terminated, entities and relations by name.
void write_query_jsonl(const std::vector<QuerySample>& samples, const TripleStore& kg,
                       std::ostream& out);
void write_query_jsonl(const std::vector<QuerySample>& samples, const TripleStore& kg,
                       const std::string& path);
std::vector<QuerySample> read_query_jsonl(const std::string& path, const TripleStore& kg);

// Recomputes every sample's answers on the given graph and throws DataError
// on any mismatch with the stored sets.
void validate_samples(const std::vector<QuerySample>& samples, const TripleStore& answer_graph);

}  // namespace horo
