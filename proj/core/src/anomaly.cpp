#include "horo/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace horo {

std::vector<EntityId> PseudoTree::parents_at_level(std::int32_t level) const {
  std::vector<EntityId> out;
  for (EntityId e = 0; e < store.entity_count(); ++e)
    if (depth[e] == level && injected.count(e)) out.push_back(e);
  return out;
}

std::vector<EntityId> PseudoTree::children_of(EntityId parent) const {
  std::vector<EntityId> out;
  for (RelationId r = 0; r < store.relation_count(); ++r) {
    const auto& succ = store.successors(parent, r);
    out.insert(out.end(), succ.begin(), succ.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool PseudoTree::is_injected(EntityId parent, EntityId child) const {
  auto it = injected.find(parent);
  return it != injected.end() && it->second.count(child) > 0;
}

namespace {

bool is_ancestor(const TripleStore& tree, EntityId ancestor, EntityId node) {
  // Walk every predecessor chain; hierarchies are shallow.
  if (ancestor == node) return true;
  for (const auto& [head, rel] : tree.predecessors(node)) {
    (void)rel;
    if (is_ancestor(tree, ancestor, head)) return true;
  }
  return false;
}

}  // namespace

PseudoTree build_pseudo_tree(const TripleStore& tree, double noise_rate, std::uint64_t seed) {
  if (noise_rate < 0.0 || noise_rate > 1.0)
    throw UsageError("build_pseudo_tree: noise rate in [0, 1]");
  PseudoTree pt;
  pt.noise_rate = noise_rate;
  pt.depth = node_depths(tree);

  std::vector<bool> has_children(tree.entity_count(), false);
  for (const Triple& t : tree.triples()) has_children[t.head] = true;
  std::vector<EntityId> leaves;
  for (EntityId e = 0; e < tree.entity_count(); ++e)
    if (!has_children[e]) leaves.push_back(e);

  std::vector<Triple> triples = tree.triples();
  Rng rng(derive_seed(seed, "pseudo_tree"));
  for (EntityId p = 0; p < tree.entity_count(); ++p) {
    if (!has_children[p]) continue;
    pt.max_parent_depth = std::max(pt.max_parent_depth, pt.depth[p]);
    auto& bucket = pt.injected[p];  // parents always get an entry
    std::size_t child_count = 0;
    RelationId parent_rel = 0;
    for (RelationId r = 0; r < tree.relation_count(); ++r) {
      const auto& succ = tree.successors(p, r);
      if (!succ.empty()) parent_rel = r;
      child_count += succ.size();
    }
    const auto want = static_cast<std::size_t>(
        std::ceil(noise_rate * static_cast<double>(child_count)));
    std::size_t candidates = 0;
    for (EntityId leaf : leaves)
      if (!is_ancestor(tree, p, leaf)) ++candidates;
    if (candidates == 0) {
      // A root whose subtree covers every leaf has nothing foreign to draw
      // from (single-rooted hierarchies); any other starved parent is a
      // data problem.
      if (pt.depth[p] == 0) continue;
      throw DataError("build_pseudo_tree: tree too small to sample foreign leaves");
    }
    while (bucket.size() < std::min(want, candidates)) {
      const EntityId leaf = leaves[rng.next_below(leaves.size())];
      if (is_ancestor(tree, p, leaf)) continue;  // same subtree
      if (!bucket.insert(leaf).second) continue;
      triples.push_back({p, parent_rel, leaf});
    }
  }
  pt.store = TripleStore(tree.entities(), tree.relations(), std::move(triples));
  return pt;
}

PrecisionRecall confusion_to_prf(std::int64_t tp, std::int64_t fp, std::int64_t fn,
                                 std::int64_t tn) {
  PrecisionRecall out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  out.tn = tn;
  out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

namespace {

RelationId level_relation(const PseudoTree& pt, EntityId parent) {
  for (RelationId r = 0; r < pt.store.relation_count(); ++r)
    if (!pt.store.successors(parent, r).empty()) return r;
  return 0;
}

}  // namespace

std::vector<ScoredChild> score_children(const PseudoTree& pt, const ParameterStore& params,
                                        const ModelConfig& cfg, std::int32_t level) {
  const Curvature c = params.curvature_param();
  std::vector<ScoredChild> out;
  for (EntityId p : pt.parents_at_level(level)) {
    const RelationId rel = level_relation(pt, p);
    const Hyperboloid region =
        translate(params.entity(p), params.relation(rel), c);
    for (EntityId child : pt.children_of(p)) {
      const double s =
          point_box_distance(params.entity(child).cen, region, cfg.dist, c);
      out.push_back({p, child, s, pt.is_injected(p, child)});
    }
  }
  return out;
}

double choose_threshold_max_f1(std::span<const ScoredChild> scored) {
  std::vector<double> values;
  values.reserve(scored.size());
  for (const ScoredChild& s : scored) values.push_back(s.score);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<double> candidates;
  candidates.push_back(values.empty() ? 0.0 : values.front() - 1.0);  // predict everything
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    candidates.push_back(0.5 * (values[i] + values[i + 1]));
  if (!values.empty()) candidates.push_back(values.back() + 1.0);  // predict nothing

  double best_f1 = -1.0;
  double best_tau = candidates.front();
  for (double tau : candidates) {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const ScoredChild& s : scored) {
      const bool predicted = s.score > tau;
      if (predicted && s.anomalous) ++tp;
      else if (predicted) ++fp;
      else if (s.anomalous) ++fn;
      else ++tn;
    }
    const double f1 = confusion_to_prf(tp, fp, fn, tn).f1;
    if (f1 > best_f1 + 1e-15) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  return best_tau;
}

namespace {

AnomalyLevelResult evaluate_at_threshold(std::span<const ScoredChild> scored, double tau,
                                         std::int32_t level, std::int64_t parents) {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const ScoredChild& s : scored) {
    const bool predicted = s.score > tau;
    if (predicted && s.anomalous) ++tp;
    else if (predicted) ++fp;
    else if (s.anomalous) ++fn;
    else ++tn;
  }
  AnomalyLevelResult out;
  out.level = level;
  out.metrics = confusion_to_prf(tp, fp, fn, tn);
  out.threshold = tau;
  out.parents_evaluated = parents;
  return out;
}

AnomalyLevelResult detect_with_scores(std::vector<ScoredChild> scored,
                                      const std::vector<EntityId>& parents, std::int32_t level,
                                      const ThresholdPolicy& policy, std::uint64_t seed) {
  if (parents.empty()) throw DataError("anomaly_detect: no parents at level");

  switch (policy.kind) {
    case ThresholdPolicy::Kind::fixed:
      return evaluate_at_threshold(scored, policy.threshold, level,
                                   static_cast<std::int64_t>(parents.size()));
    case ThresholdPolicy::Kind::quantile: {
      std::vector<double> values;
      for (const ScoredChild& s : scored) values.push_back(s.score);
      std::sort(values.begin(), values.end());
      const auto rank = static_cast<std::size_t>(
          std::ceil(policy.quantile * static_cast<double>(values.size())));
      const double tau = values[std::min(values.size() - 1, rank == 0 ? 0 : rank - 1)];
      return evaluate_at_threshold(scored, tau, level,
                                   static_cast<std::int64_t>(parents.size()));
    }
    case ThresholdPolicy::Kind::calibrated:
      break;
  }

  // Calibrated: tune the threshold on a held-out subset of parents, report
  // metrics on the rest (on the same parent when only one exists).
  std::vector<EntityId> order = parents;
  Rng rng(derive_seed(seed, "anomaly_calibration", static_cast<std::uint64_t>(level)));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  const auto n = order.size();
  std::size_t n_cal = static_cast<std::size_t>(
      std::llround(policy.calibration_fraction * static_cast<double>(n)));
  n_cal = std::clamp<std::size_t>(n_cal, 1, n > 1 ? n - 1 : 1);
  std::set<EntityId> cal_set(order.begin(), order.begin() + n_cal);

  std::vector<ScoredChild> cal, eval;
  for (const ScoredChild& s : scored)
    (cal_set.count(s.parent) ? cal : eval).push_back(s);
  if (eval.empty()) eval = cal;  // single-parent level

  const double tau = choose_threshold_max_f1(cal);
  const std::size_t n_eval = n > 1 ? n - n_cal : 1;
  return evaluate_at_threshold(eval, tau, level, static_cast<std::int64_t>(n_eval));
}

}  // namespace

AnomalyLevelResult anomaly_detect(const PseudoTree& pt, const ParameterStore& params,
                                  const ModelConfig& cfg, std::int32_t level,
                                  const ThresholdPolicy& policy, std::uint64_t seed) {
  return detect_with_scores(score_children(pt, params, cfg, level), pt.parents_at_level(level),
                            level, policy, seed);
}

SemanticVectors load_semantic_vectors(const std::string& path, const TripleStore& kg) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open semantic vector file: " + path);
  SemanticVectors out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected name<TAB>values");
    const std::string name = line.substr(0, tab);
    const auto id = kg.entities().find(name);
    if (!id)
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown entity '" + name + "'");
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> v;
    double x;
    while (values >> x) v.push_back(x);
    if (v.empty() || !all_finite(v))
      throw DataError(path + ":" + std::to_string(line_no) + ": bad vector");
    if (out.dim == 0) out.dim = static_cast<std::int32_t>(v.size());
    if (static_cast<std::int32_t>(v.size()) != out.dim)
      throw DataError(path + ":" + std::to_string(line_no) + ": dimension mismatch (" +
                      std::to_string(v.size()) + " vs " + std::to_string(out.dim) + ")");
    out.vectors[*id] = std::move(v);
  }
  if (out.vectors.empty()) throw DataError(path + ": no vectors");
  return out;
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kTinyNorm || nb < kTinyNorm) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace

std::vector<ScoredChild> score_children_semantic(const PseudoTree& pt,
                                                 const ParameterStore& params,
                                                 const ModelConfig& cfg, std::int32_t level,
                                                 const SemanticVectors& vecs, double beta) {
  std::vector<ScoredChild> base = score_children(pt, params, cfg, level);
  if (beta == 0.0) return base;  // degenerate weight: plain geometric scoring

  // Coverage check over every child this scoring touches.
  std::string missing;
  for (const ScoredChild& s : base)
    if (!vecs.vectors.count(s.child)) missing += " " + std::to_string(s.child);
  for (const ScoredChild& s : base)
    if (!vecs.vectors.count(s.parent)) missing += " " + std::to_string(s.parent);
  if (!missing.empty())
    throw DataError("semantic vectors missing entity ids:" + missing);

  std::vector<ScoredChild> out;
  std::size_t i = 0;
  while (i < base.size()) {
    std::size_t j = i;
    while (j < base.size() && base[j].parent == base[i].parent) ++j;

    // Min-max normalize the geometric score within this parent's children.
    double lo = base[i].score, hi = base[i].score;
    for (std::size_t k = i; k < j; ++k) {
      lo = std::min(lo, base[k].score);
      hi = std::max(hi, base[k].score);
    }
    const double range = hi - lo;

    // Mean vector of the genuine children.
    std::vector<double> mean(vecs.dim, 0.0);
    std::size_t genuine = 0;
    for (std::size_t k = i; k < j; ++k) {
      if (base[k].anomalous) continue;
      const auto& v = vecs.vectors.at(base[k].child);
      for (std::int32_t x = 0; x < vecs.dim; ++x) mean[x] += v[x];
      ++genuine;
    }
    if (genuine > 0)
      for (double& x : mean) x /= static_cast<double>(genuine);

    for (std::size_t k = i; k < j; ++k) {
      ScoredChild s = base[k];
      const double normalized = range > 0.0 ? (s.score - lo) / range : 0.0;
      s.score = normalized + beta * (1.0 - cosine(vecs.vectors.at(s.child), mean));
      out.push_back(s);
    }
    i = j;
  }
  return out;
}

AnomalyLevelResult anomaly_detect_semantic(const PseudoTree& pt, const ParameterStore& params,
                                           const ModelConfig& cfg, std::int32_t level,
                                           const SemanticVectors& vecs, double beta,
                                           const ThresholdPolicy& policy, std::uint64_t seed) {
  return detect_with_scores(score_children_semantic(pt, params, cfg, level, vecs, beta),
                            pt.parents_at_level(level), level, policy, seed);
}

}  // namespace horo
