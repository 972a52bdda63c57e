#pragma once

#include <map>

#include "horo/model.hpp"
#include "horo/triples.hpp"

namespace horo {

// A hierarchy with a fixed fraction of foreign leaves attached to each
// parent. Parents are grouped by depth: level L holds the parents at depth L
// (reported as P<L>; single-rooted trees have the root alone at P0).
struct PseudoTree {
  TripleStore store;  // base tree plus injected edges
  double noise_rate = 0.10;
  // parent -> injected foreign leaves (genuine leaves from other subtrees).
  std::map<EntityId, std::set<EntityId>> injected;
  std::vector<std::int32_t> depth;  // per entity, from the base tree
  std::int32_t max_parent_depth = 0;

  std::vector<EntityId> parents_at_level(std::int32_t level) const;
  std::vector<EntityId> children_of(EntityId parent) const;
  bool is_injected(EntityId parent, EntityId child) const;
};

// Per parent p: ceil(rate * |children(p)|) leaves sampled uniformly from
// outside p's subtree and attached under p's own relation.
PseudoTree build_pseudo_tree(const TripleStore& tree, double noise_rate, std::uint64_t seed);

struct ThresholdPolicy {
  enum class Kind { calibrated, quantile, fixed };
  Kind kind = Kind::calibrated;
  double quantile = 0.9;   // for Kind::quantile
  double threshold = 0.0;  // for Kind::fixed
  double calibration_fraction = 0.2;
};

struct PrecisionRecall {
  double precision = 0.0;  // 0 when no positives are predicted
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

PrecisionRecall confusion_to_prf(std::int64_t tp, std::int64_t fp, std::int64_t fn,
                                 std::int64_t tn);

struct ScoredChild {
  EntityId parent;
  EntityId child;
  double score;
  bool anomalous;  // ground truth
};

// Distance of each child's center to its parent's region translated by the
// level relation (the single relation when |R| = 1).
std::vector<ScoredChild> score_children(const PseudoTree& pt, const ParameterStore& params,
                                        const ModelConfig& cfg, std::int32_t level);

// Threshold maximizing F1 over the given scored set (children above the
// threshold are predicted anomalous).
double choose_threshold_max_f1(std::span<const ScoredChild> scored);

struct AnomalyLevelResult {
  std::int32_t level = 0;
  PrecisionRecall metrics;
  double threshold = 0.0;
  std::int64_t parents_evaluated = 0;
};

// Calibrated policies pick the threshold on a held-out fraction of the
// level's parents and evaluate on the rest; other policies evaluate on all.
AnomalyLevelResult anomaly_detect(const PseudoTree& pt, const ParameterStore& params,
                                  const ModelConfig& cfg, std::int32_t level,
                                  const ThresholdPolicy& policy, std::uint64_t seed);

// --- semantic augmentation ---------------------------------------------------

// TSV: entity<TAB>v1 v2 v3 ...; vectors must share one dimension.
SemanticVectors load_semantic_vectors(const std::string& path, const TripleStore& kg);

// Blended anomaly scoring: per-parent min-max normalized geometric score plus
// beta * (1 - cosine(child vector, mean of the parent's genuine-children
// vectors)).
std::vector<ScoredChild> score_children_semantic(const PseudoTree& pt,
                                                 const ParameterStore& params,
                                                 const ModelConfig& cfg, std::int32_t level,
                                                 const SemanticVectors& vecs, double beta);

AnomalyLevelResult anomaly_detect_semantic(const PseudoTree& pt, const ParameterStore& params,
                                           const ModelConfig& cfg, std::int32_t level,
                                           const SemanticVectors& vecs, double beta,
                                           const ThresholdPolicy& policy, std::uint64_t seed);

}  // namespace horo
