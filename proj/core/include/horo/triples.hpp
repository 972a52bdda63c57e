#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "horo/common.hpp"

namespace horo {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// Name <-> contiguous id mapping, ids assigned in first-appearance order.
class Vocab {
 public:
  std::int32_t intern(const std::string& name);
  std::optional<std::int32_t> find(const std::string& name) const;
  const std::string& name(std::int32_t id) const { return names_[id]; }
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend bool operator==(const Triple&, const Triple&) = default;
};

// Directed multi-relational graph with sorted, duplicate-free adjacency.
class TripleStore {
 public:
  TripleStore() = default;
  TripleStore(Vocab entities, Vocab relations, std::vector<Triple> triples);

  const Vocab& entities() const { return entities_; }
  const Vocab& relations() const { return relations_; }
  std::int32_t entity_count() const { return entities_.size(); }
  std::int32_t relation_count() const { return relations_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t edge_count() const { return triples_.size(); }

  // Sorted tail ids for (head, relation); empty when absent.
  const std::vector<EntityId>& successors(EntityId head, RelationId rel) const;
  // Sorted (head, relation) pairs leading into tail.
  const std::vector<std::pair<EntityId, RelationId>>& predecessors(EntityId tail) const;

  bool has_edge(EntityId head, RelationId rel, EntityId tail) const;

 private:
  void build_index();

  Vocab entities_;
  Vocab relations_;
  std::vector<Triple> triples_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> forward_;
  std::vector<std::vector<std::pair<EntityId, RelationId>>> reverse_;
};

struct LoadStats {
  std::size_t duplicate_count = 0;
};

// Reads head<TAB>relation<TAB>tail lines; '#' lines are comments. Duplicate
// triples are dropped and counted. Malformed lines and empty inputs throw
// DataError with the offending line number.
TripleStore load_tsv(const std::string& path, LoadStats* stats = nullptr);
void save_tsv(const TripleStore& kg, const std::string& path);

struct SplitRatios {
  double train = 0.75;
  double valid = 0.10;
  double test = 0.15;
};

struct SplitBundle {
  TripleStore train;
  TripleStore valid;
  TripleStore test;
  // train + valid + test edges, kept for full-graph answer computation.
  TripleStore full;
};

// Uniform random edge partition. Redraws (up to 100 attempts) until every
// entity occurring in valid/test also occurs in some train edge.
SplitBundle split(const TripleStore& kg, const SplitRatios& ratios, std::uint64_t seed);

enum class DepthMode { single, per_level };

// single: collapse every relation to one. per_level: relation id becomes the
// depth of the head node (roots at depth 0); requires a rooted DAG/forest
// whose nodes have one consistent depth.
TripleStore depth_encode(const TripleStore& kg, DepthMode mode);

// Depth per entity id (root 0); same preconditions as per_level encoding.
std::vector<std::int32_t> node_depths(const TripleStore& kg);

}  // namespace horo
