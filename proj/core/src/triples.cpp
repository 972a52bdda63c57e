#include "horo/triples.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>

namespace horo {

namespace {

std::uint64_t pair_key(EntityId head, RelationId rel) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(head)) << 32) |
         static_cast<std::uint32_t>(rel);
}

const std::vector<EntityId> kEmptySuccessors;
const std::vector<std::pair<EntityId, RelationId>> kEmptyPredecessors;

}  // namespace

std::int32_t Vocab::intern(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

std::optional<std::int32_t> Vocab::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TripleStore::TripleStore(Vocab entities, Vocab relations, std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)),
      triples_(std::move(triples)) {
  for (const Triple& t : triples_) {
    if (t.head < 0 || t.head >= entities_.size() || t.tail < 0 || t.tail >= entities_.size() ||
        t.relation < 0 || t.relation >= relations_.size())
      throw DataError("TripleStore: id outside vocabulary");
  }
  build_index();
}

void TripleStore::build_index() {
  forward_.clear();
  reverse_.assign(entities_.size(), {});
  for (const Triple& t : triples_) {
    forward_[pair_key(t.head, t.relation)].push_back(t.tail);
    reverse_[t.tail].emplace_back(t.head, t.relation);
  }
  for (auto& [key, tails] : forward_) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
  }
  for (auto& preds : reverse_) {
    std::sort(preds.begin(), preds.end());
    preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
  }
}

const std::vector<EntityId>& TripleStore::successors(EntityId head, RelationId rel) const {
  auto it = forward_.find(pair_key(head, rel));
  return it == forward_.end() ? kEmptySuccessors : it->second;
}

const std::vector<std::pair<EntityId, RelationId>>& TripleStore::predecessors(
    EntityId tail) const {
  if (tail < 0 || tail >= static_cast<EntityId>(reverse_.size())) return kEmptyPredecessors;
  return reverse_[tail];
}

bool TripleStore::has_edge(EntityId head, RelationId rel, EntityId tail) const {
  const auto& tails = successors(head, rel);
  return std::binary_search(tails.begin(), tails.end(), tail);
}

TripleStore load_tsv(const std::string& path, LoadStats* stats) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open triple file: " + path);

  Vocab entities;
  Vocab relations;
  std::vector<Triple> triples;
  std::set<std::tuple<EntityId, RelationId, EntityId>> seen;
  std::size_t duplicates = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected head<TAB>relation<TAB>tail");
    const std::string head = line.substr(0, tab1);
    const std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string tail = line.substr(tab2 + 1);
    if (head.empty() || rel.empty() || tail.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty field");
    const Triple t{entities.intern(head), relations.intern(rel), entities.intern(tail)};
    if (!seen.insert({t.head, t.relation, t.tail}).second) {
      ++duplicates;
      continue;
    }
    triples.push_back(t);
  }
  if (triples.empty()) throw DataError(path + ": no triples");
  if (stats) stats->duplicate_count = duplicates;
  return TripleStore(std::move(entities), std::move(relations), std::move(triples));
}

void save_tsv(const TripleStore& kg, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write triple file: " + path);
  for (const Triple& t : kg.triples()) {
    file << kg.entities().name(t.head) << '\t' << kg.relations().name(t.relation) << '\t'
         << kg.entities().name(t.tail) << '\n';
  }
}

namespace {

TripleStore subset_store(const TripleStore& kg, const std::vector<std::size_t>& indices) {
  // Vocabularies are shared with the source graph so ids stay comparable
  // across split parts.
  std::vector<Triple> triples;
  triples.reserve(indices.size());
  for (std::size_t i : indices) triples.push_back(kg.triples()[i]);
  return TripleStore(kg.entities(), kg.relations(), std::move(triples));
}

}  // namespace

SplitBundle split(const TripleStore& kg, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw UsageError("split: ratios must be nonnegative and sum to 1");

  const std::size_t n = kg.edge_count();
  // Largest-remainder apportioning so counts sum to n exactly.
  const double exact[3] = {ratios.train * n, ratios.valid * n, ratios.test * n};
  std::size_t counts[3];
  double rem[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    counts[i] = static_cast<std::size_t>(exact[i]);
    rem[i] = exact[i] - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(attempt)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);

    std::vector<std::size_t> train_idx(order.begin(), order.begin() + counts[0]);
    std::vector<std::size_t> valid_idx(order.begin() + counts[0],
                                       order.begin() + counts[0] + counts[1]);
    std::vector<std::size_t> test_idx(order.begin() + counts[0] + counts[1], order.end());

    std::vector<bool> in_train(kg.entity_count(), false);
    for (std::size_t i : train_idx) {
      in_train[kg.triples()[i].head] = true;
      in_train[kg.triples()[i].tail] = true;
    }
    bool ok = true;
    for (const auto& held : {valid_idx, test_idx}) {
      for (std::size_t i : held) {
        if (!in_train[kg.triples()[i].head] || !in_train[kg.triples()[i].tail]) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (!ok) continue;

    SplitBundle bundle;
    bundle.train = subset_store(kg, train_idx);
    bundle.valid = subset_store(kg, valid_idx);
    bundle.test = subset_store(kg, test_idx);
    bundle.full = TripleStore(kg.entities(), kg.relations(), kg.triples());
    return bundle;
  }
  throw DataError(
      "split: could not satisfy the train-coverage constraint in 100 attempts; "
      "consider a larger train ratio (e.g. 1,0,0 for leaf-heavy hierarchies)");
}

std::vector<std::int32_t> node_depths(const TripleStore& kg) {
  const std::int32_t n = kg.entity_count();
  std::vector<std::int32_t> indegree(n, 0);
  for (const Triple& t : kg.triples()) ++indegree[t.tail];

  std::vector<std::int32_t> depth(n, -1);
  std::deque<EntityId> queue;
  for (EntityId e = 0; e < n; ++e) {
    if (indegree[e] == 0) {
      depth[e] = 0;
      queue.push_back(e);
    }
  }
  if (queue.empty()) throw DataError("depth_encode: graph has no root (cycle)");

  // BFS; every edge must advance depth by exactly one.
  std::vector<std::vector<std::pair<RelationId, EntityId>>> out(n);
  for (const Triple& t : kg.triples()) out[t.head].emplace_back(t.relation, t.tail);
  std::size_t visited_edges = 0;
  while (!queue.empty()) {
    const EntityId u = queue.front();
    queue.pop_front();
    for (const auto& [rel, v] : out[u]) {
      ++visited_edges;
      if (depth[v] == -1) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      } else if (depth[v] != depth[u] + 1) {
        throw DataError("depth_encode: node '" + kg.entities().name(v) +
                        "' has conflicting depths");
      }
    }
  }
  if (visited_edges != kg.edge_count())
    throw DataError("depth_encode: graph contains a cycle");
  for (EntityId e = 0; e < n; ++e)
    if (depth[e] == -1) throw DataError("depth_encode: unreachable node (cycle)");
  return depth;
}

TripleStore depth_encode(const TripleStore& kg, DepthMode mode) {
  Vocab relations;
  std::vector<Triple> triples;
  triples.reserve(kg.edge_count());
  if (mode == DepthMode::single) {
    const RelationId r = relations.intern("child");
    for (const Triple& t : kg.triples()) triples.push_back({t.head, r, t.tail});
  } else {
    const auto depth = node_depths(kg);
    std::int32_t max_head_depth = 0;
    for (const Triple& t : kg.triples()) max_head_depth = std::max(max_head_depth, depth[t.head]);
    for (std::int32_t d = 0; d <= max_head_depth; ++d) relations.intern("level" + std::to_string(d));
    for (const Triple& t : kg.triples()) triples.push_back({t.head, depth[t.head], t.tail});
  }
  // Re-encoding can collapse previously distinct triples; dedup silently.
  std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.head, a.relation, a.tail) < std::tie(b.head, b.relation, b.tail);
  });
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  Vocab entities = kg.entities();
  return TripleStore(std::move(entities), std::move(relations), std::move(triples));
}

}  // namespace horo
