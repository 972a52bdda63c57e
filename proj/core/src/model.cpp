#include "horo/model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace horo {

ParameterStore::ParameterStore(std::int32_t d, std::int32_t hidden, std::int32_t n_entities,
                               std::int32_t n_relations, Curvature curvature)
    : d_(d), hidden_(hidden), n_entities_(n_entities), n_relations_(n_relations),
      curvature_trainable_(curvature.trainable) {
  if (d < 1) throw UsageError("ParameterStore: d must be >= 1");
  if (hidden < 1) throw UsageError("ParameterStore: hidden width must be >= 1");
  if (curvature.c <= 0.0) throw UsageError("ParameterStore: curvature scale must be positive");
  shapes_.resize(block::kCount);
  shapes_[block::kEntityCen] = {n_entities, d};
  shapes_[block::kEntityLim] = {n_entities, d};
  shapes_[block::kRelCen] = {n_relations, d};
  shapes_[block::kRelLim] = {n_relations, d};
  const auto net = [&](std::int32_t base, std::int32_t in_dim) {
    shapes_[base + 0] = {1, hidden * in_dim};
    shapes_[base + 1] = {1, hidden};
    shapes_[base + 2] = {1, d * hidden};
    shapes_[base + 3] = {1, d};
  };
  net(block::kAttW1, 2 * d);
  net(block::kSetInW1, 2 * d);
  net(block::kSetOutW1, d);
  net(block::kCtrInW1, 2 * d);
  net(block::kCtrOutW1, d);
  shapes_[block::kCurvature] = {1, 1};

  blocks_.resize(block::kCount);
  for (std::int32_t b = 0; b < block::kCount; ++b)
    blocks_[b].assign(static_cast<std::size_t>(shapes_[b].rows) * shapes_[b].row_len, 0.0);
  blocks_[block::kCurvature][0] = curvature.c;
}

ManifoldKind ParameterStore::kind(std::int32_t b) const {
  switch (b) {
    case block::kEntityCen:
    case block::kRelCen:
      return ManifoldKind::ball;
    case block::kEntityLim:
    case block::kRelLim:
      return ManifoldKind::nonneg;
    default:
      return ManifoldKind::euclid;
  }
}

const char* ParameterStore::block_name(std::int32_t b) {
  static constexpr const char* kNames[block::kCount] = {
      "entity_cen", "entity_lim", "rel_cen", "rel_lim",
      "att_w1", "att_b1", "att_w2", "att_b2",
      "set_in_w1", "set_in_b1", "set_in_w2", "set_in_b2",
      "set_out_w1", "set_out_b1", "set_out_w2", "set_out_b2",
      "ctr_in_w1", "ctr_in_b1", "ctr_in_w2", "ctr_in_b2",
      "ctr_out_w1", "ctr_out_b1", "ctr_out_w2", "ctr_out_b2",
      "curvature"};
  return kNames[b];
}

std::span<double> ParameterStore::row(std::int32_t b, std::int32_t r) {
  const auto len = static_cast<std::size_t>(shapes_[b].row_len);
  return {blocks_[b].data() + r * len, len};
}

std::span<const double> ParameterStore::row(std::int32_t b, std::int32_t r) const {
  const auto len = static_cast<std::size_t>(shapes_[b].row_len);
  return {blocks_[b].data() + r * len, len};
}

Hyperboloid ParameterStore::entity(EntityId e) const {
  auto cen = row(block::kEntityCen, e);
  auto lim = row(block::kEntityLim, e);
  return Hyperboloid(BallPoint::project({cen.begin(), cen.end()}), {lim.begin(), lim.end()});
}

Hyperboloid ParameterStore::relation(RelationId r) const {
  auto cen = row(block::kRelCen, r);
  auto lim = row(block::kRelLim, r);
  return Hyperboloid(BallPoint::project({cen.begin(), cen.end()}), {lim.begin(), lim.end()});
}

// --- initialization -----------------------------------------------------------

namespace {

void init_center_rows(ParameterStore& store, std::int32_t blk, Rng& rng) {
  const std::int32_t d = store.dim();
  const double sigma = 0.1 / std::sqrt(static_cast<double>(d));
  std::vector<double> tangent(d);
  const double c = store.curvature();
  for (std::int32_t r = 0; r < store.shape(blk).rows; ++r) {
    for (double& t : tangent) t = rng.normal(0.0, sigma);
    std::vector<double> origin(d, 0.0);
    auto out = store.row(blk, r);
    gyro::exp_map(origin, tangent, c, out);
    gyro::project_in_place(out);
  }
}

void init_limit_rows(ParameterStore& store, std::int32_t blk, Rng& rng) {
  for (std::int32_t r = 0; r < store.shape(blk).rows; ++r)
    for (double& v : store.row(blk, r)) v = std::abs(rng.normal(0.0, 0.01));
}

void init_net(ParameterStore& store, std::int32_t base, std::int32_t in_dim, Rng& rng) {
  const double w1_bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& v : store.flat(base + 0)) v = rng.uniform(-w1_bound, w1_bound);
  for (double& v : store.flat(base + 1)) v = rng.uniform(-w1_bound, w1_bound);
  const double w2_bound = 1.0 / std::sqrt(static_cast<double>(store.hidden()));
  for (double& v : store.flat(base + 2)) v = rng.uniform(-w2_bound, w2_bound);
  for (double& v : store.flat(base + 3)) v = rng.uniform(-w2_bound, w2_bound);
}

}  // namespace

void init_params(ParameterStore& store, std::uint64_t seed) {
  const std::int32_t d = store.dim();
  Rng cen_rng(derive_seed(seed, "init/centers"));
  init_center_rows(store, block::kEntityCen, cen_rng);
  init_center_rows(store, block::kRelCen, cen_rng);
  Rng lim_rng(derive_seed(seed, "init/limits"));
  init_limit_rows(store, block::kEntityLim, lim_rng);
  init_limit_rows(store, block::kRelLim, lim_rng);
  Rng net_rng(derive_seed(seed, "init/nets"));
  init_net(store, block::kAttW1, 2 * d, net_rng);
  init_net(store, block::kSetInW1, 2 * d, net_rng);
  init_net(store, block::kSetOutW1, d, net_rng);
  init_net(store, block::kCtrInW1, 2 * d, net_rng);
  init_net(store, block::kCtrOutW1, d, net_rng);
}

void init_params_semantic(ParameterStore& store, std::uint64_t seed, const SemanticVectors& vecs,
                          double alpha) {
  init_params(store, seed);
  const std::int32_t d = store.dim();
  if (vecs.dim != d)
    throw DataError("semantic initialization requires vectors of the embedding dimension (got " +
                    std::to_string(vecs.dim) + ", need " + std::to_string(d) + ")");
  const double c = store.curvature();
  std::vector<double> tangent(d);
  for (EntityId e = 0; e < store.entity_count(); ++e) {
    auto it = vecs.vectors.find(e);
    if (it == vecs.vectors.end())
      throw DataError("semantic vectors missing entity id " + std::to_string(e));
    const std::vector<double>& v = it->second;
    const double n = norm(v);
    if (n < kTinyNorm) continue;  // zero vector: keep the default jitter
    const double scale = alpha * std::min(n, 1.0) / n;
    for (std::int32_t j = 0; j < d; ++j) tangent[j] = scale * v[j];
    std::vector<double> origin(d, 0.0);
    auto out = store.row(block::kEntityCen, e);
    gyro::exp_map(origin, tangent, c, out);
    gyro::project_in_place(out);
  }
}

// --- plain forward ----------------------------------------------------------

namespace {

// Two-layer perceptron with ReLU hidden activation.
void mlp_eval(const ParameterStore& s, std::int32_t base, std::span<const double> in,
              std::span<double> out) {
  const std::int32_t h = s.hidden();
  const std::int32_t d = s.dim();
  const auto w1 = s.flat(base + 0);
  const auto b1 = s.flat(base + 1);
  const auto w2 = s.flat(base + 2);
  const auto b2 = s.flat(base + 3);
  const auto in_dim = static_cast<std::int32_t>(in.size());
  std::vector<double> hid(h);
  for (std::int32_t i = 0; i < h; ++i) {
    double acc = b1[i];
    const double* row = w1.data() + static_cast<std::size_t>(i) * in_dim;
    for (std::int32_t j = 0; j < in_dim; ++j) acc += row[j] * in[j];
    hid[i] = acc > 0.0 ? acc : 0.0;
  }
  for (std::int32_t i = 0; i < d; ++i) {
    double acc = b2[i];
    const double* row = w2.data() + static_cast<std::size_t>(i) * h;
    for (std::int32_t j = 0; j < h; ++j) acc += row[j] * hid[j];
    out[i] = acc;
  }
}

std::vector<double> member_input(const Hyperboloid& m) {
  std::vector<double> in(m.dim() * 2);
  std::copy(m.cen.coords().begin(), m.cen.coords().end(), in.begin());
  std::copy(m.lim.begin(), m.lim.end(), in.begin() + m.dim());
  return in;
}

// Per-dimension softmax across members, with the usual max subtraction.
std::vector<std::vector<double>> softmax_over_members(std::vector<std::vector<double>> logits) {
  const std::size_t n = logits.size();
  const std::size_t d = logits[0].size();
  std::vector<double> mx = logits[0];
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mx[j] = std::max(mx[j], logits[i][j]);
  std::vector<double> denom(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      logits[i][j] = std::exp(logits[i][j] - mx[j]);
      denom[j] += logits[i][j];
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) logits[i][j] /= denom[j];
  return logits;
}

std::vector<std::vector<double>> center_weights(const ParameterStore& store,
                                                const ModelConfig& cfg,
                                                std::span<const Hyperboloid> members,
                                                ModelConfig::CenterAgg mode) {
  const std::size_t n = members.size();
  const std::int32_t d = store.dim();
  if (mode == ModelConfig::CenterAgg::avg) {
    return std::vector<std::vector<double>>(
        n, std::vector<double>(d, 1.0 / static_cast<double>(n)));
  }
  std::vector<std::vector<double>> logits(n, std::vector<double>(d));
  if (mode == ModelConfig::CenterAgg::attention) {
    const std::int32_t net = cfg.share_set_mlp ? block::kSetInW1 : block::kAttW1;
    for (std::size_t i = 0; i < n; ++i) mlp_eval(store, net, member_input(members[i]), logits[i]);
  } else {
    // Set-conditioned logits: each member's inner encoding mixed with the
    // mean pooled encoding, pushed through the outer net.
    std::vector<std::vector<double>> enc(n, std::vector<double>(d));
    std::vector<double> pool(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      mlp_eval(store, block::kCtrInW1, member_input(members[i]), enc[i]);
      for (std::int32_t j = 0; j < d; ++j) pool[j] += enc[i][j];
    }
    for (std::int32_t j = 0; j < d; ++j) pool[j] /= static_cast<double>(n);
    std::vector<double> mixed(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::int32_t j = 0; j < d; ++j) mixed[j] = 0.5 * (enc[i][j] + pool[j]);
      mlp_eval(store, block::kCtrOutW1, mixed, logits[i]);
    }
  }
  return softmax_over_members(std::move(logits));
}

}  // namespace

BallPoint aggregate_centers(const ParameterStore& store, const ModelConfig& cfg,
                            std::span<const Hyperboloid> members, ModelConfig::CenterAgg mode) {
  if (members.empty()) throw UsageError("aggregate_centers: no members");
  if (members.size() == 1) return members[0].cen;  // weight 1, exact
  const std::int32_t d = store.dim();
  const double c = store.curvature();
  const auto weights = center_weights(store, cfg, members, mode);

  std::vector<double> acc(d, 0.0);
  if (cfg.literal_center_sum) {
    // Literal reading: per-coordinate gyro scaling, then a Euclidean sum.
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::int32_t j = 0; j < d; ++j)
        acc[j] += gyro::mobius_scalar_1d(weights[i][j], members[i].cen[j], c);
    return BallPoint::project(std::move(acc));
  }
  // Weighted combination in the origin tangent space; ball-closed by
  // construction and equal to the literal form when one weight is 1.
  std::vector<double> tangent(d);
  for (std::size_t i = 0; i < members.size(); ++i) {
    gyro::log_map(std::vector<double>(d, 0.0), members[i].cen.coords(), c, tangent);
    for (std::int32_t j = 0; j < d; ++j) acc[j] += weights[i][j] * tangent[j];
  }
  std::vector<double> out(d);
  gyro::exp_map(std::vector<double>(d, 0.0), acc, c, out);
  return BallPoint::project(std::move(out));
}

Hyperboloid intersect_members(const ParameterStore& store, const ModelConfig& cfg,
                              std::span<const Hyperboloid> members) {
  if (members.size() < 2) throw UsageError("intersect_members: arity >= 2 required");
  const std::int32_t d = store.dim();
  const double c = store.curvature();
  BallPoint cen = aggregate_centers(store, cfg, members, cfg.center_agg);

  std::vector<double> min_lim = members[0].lim;
  for (std::size_t i = 1; i < members.size(); ++i)
    for (std::int32_t j = 0; j < d; ++j) min_lim[j] = std::min(min_lim[j], members[i].lim[j]);

  if (cfg.limit_agg == ModelConfig::LimitAgg::min)
    return Hyperboloid(std::move(cen), std::move(min_lim));

  // Shrink through the sigmoid of a permutation-invariant set encoding.
  std::vector<double> pool(d, 0.0);
  std::vector<double> enc(d);
  for (const Hyperboloid& m : members) {
    mlp_eval(store, block::kSetInW1, member_input(m), enc);
    for (std::int32_t j = 0; j < d; ++j) pool[j] += enc[j];
  }
  for (std::int32_t j = 0; j < d; ++j) pool[j] /= static_cast<double>(members.size());
  std::vector<double> ds(d);
  mlp_eval(store, block::kSetOutW1, pool, ds);
  std::vector<double> lim(d);
  for (std::int32_t j = 0; j < d; ++j)
    lim[j] = gyro::mobius_scalar_1d(stable_sigmoid(ds[j]), min_lim[j], c);
  return Hyperboloid(std::move(cen), std::move(lim));
}

Hyperboloid embed_query(const ParameterStore& store, const ModelConfig& cfg,
                        const QueryAst& branch) {
  switch (branch.kind) {
    case QueryAst::Kind::entity:
      return store.entity(branch.id);
    case QueryAst::Kind::translate:
      return translate(embed_query(store, cfg, branch.children[0]), store.relation(branch.id),
                       store.curvature_param());
    case QueryAst::Kind::intersect: {
      std::vector<Hyperboloid> members;
      members.reserve(branch.children.size());
      for (const QueryAst& c : branch.children) members.push_back(embed_query(store, cfg, c));
      return intersect_members(store, cfg, members);
    }
    case QueryAst::Kind::unite:
      throw UsageError("embed_query: branch must be union-free (apply to_dnf first)");
  }
  throw UsageError("embed_query: invalid node");
}

namespace {

double plain_box_distance(std::span<const double> v, const Hyperboloid& box, const Corners& cr,
                          const DistanceWeights& w, double c) {
  if (w.reading == DistanceWeights::Reading::elementwise)
    return box_distance_kernel(v, cr.q_min, cr.q_max, box.cen.coords(), c, w.gamma,
                               w.combine_mode);
  const double d_out = gyro::distance(v, cr.q_max) + gyro::distance(cr.q_min, v);
  std::vector<double> clamped(v.size());
  for (std::size_t j = 0; j < v.size(); ++j)
    clamped[j] = std::min(cr.q_max[j], std::max(cr.q_min[j], v[j]));
  std::vector<double> diff(v.size());
  gyro::mobius_sub(box.cen.coords(), clamped, c, diff);
  double d_in = 0.0;
  for (double x : diff) d_in += std::abs(x);
  if (w.combine_mode == DistanceWeights::Combine::euclidean) return d_out + w.gamma * d_in;
  return gyro::mobius_add_1d(std::tanh(d_out), std::tanh(w.gamma * d_in), c);
}

}  // namespace

double score(const ParameterStore& store, const ModelConfig& cfg, const QueryAst& q, EntityId e) {
  const DnfQuery dnf = to_dnf(q);
  const Curvature c = store.curvature_param();
  const auto v = store.row(block::kEntityCen, e);
  double best = 0.0;
  for (std::size_t b = 0; b < dnf.branches.size(); ++b) {
    const Hyperboloid box = embed_query(store, cfg, dnf.branches[b]);
    const Corners cr = corners(box, c);
    const double d = plain_box_distance(v, box, cr, cfg.dist, c.c);
    if (b == 0 || d < best) best = d;
  }
  return best;
}

std::vector<double> score_all(const ParameterStore& store, const ModelConfig& cfg,
                              const DnfQuery& dnf) {
  const Curvature c = store.curvature_param();
  std::vector<Hyperboloid> boxes;
  std::vector<Corners> crs;
  for (const QueryAst& b : dnf.branches) {
    boxes.push_back(embed_query(store, cfg, b));
    crs.push_back(corners(boxes.back(), c));
  }
  std::vector<double> out(store.entity_count());
  for (EntityId e = 0; e < store.entity_count(); ++e) {
    const auto v = store.row(block::kEntityCen, e);
    double best = 0.0;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const double d = plain_box_distance(v, boxes[b], crs[b], cfg.dist, c.c);
      if (b == 0 || d < best) best = d;
    }
    out[e] = best;
  }
  return out;
}

double training_loss(const ParameterStore& store, const ModelConfig& cfg,
                     std::span<const TrainPair> pairs) {
  const Curvature c = store.curvature_param();
  double total = 0.0;
  for (const TrainPair& pair : pairs) {
    std::vector<Hyperboloid> boxes;
    std::vector<Corners> crs;
    for (const QueryAst& b : pair.query->branches) {
      boxes.push_back(embed_query(store, cfg, b));
      crs.push_back(corners(boxes.back(), c));
    }
    const auto dist_of = [&](EntityId e) {
      const auto v = store.row(block::kEntityCen, e);
      double best = 0.0;
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        const double d = plain_box_distance(v, boxes[b], crs[b], cfg.dist, c.c);
        if (b == 0 || d < best) best = d;
      }
      return best;
    };
    total += -stable_log_sigmoid(cfg.margin - dist_of(pair.positive));
    if (!pair.negatives.empty()) {
      double neg = 0.0;
      for (EntityId e : pair.negatives) neg += stable_log_sigmoid(dist_of(e) - cfg.margin);
      total += -neg / static_cast<double>(pair.negatives.size());
    }
  }
  return total;
}

// --- tape forward ---------------------------------------------------------

TapeCtx::TapeCtx(ad::Tape& t, const ParameterStore& s, const ModelConfig& m)
    : tape(t), store(s), cfg(m) {
  param_cache_.fill(-1);
  if (s.curvature_trainable())
    c = t.param({block::kCurvature, 0}, s.flat(block::kCurvature));
  else
    c = t.constant(s.flat(block::kCurvature));
}

ad::NodeId TapeCtx::flat_param(std::int32_t blk) {
  ad::NodeId& slot = param_cache_[blk];
  if (slot < 0) slot = tape.param({blk, 0}, store.flat(blk));
  return slot;
}

namespace {

ad::NodeId t_mlp(TapeCtx& ctx, std::int32_t base, ad::NodeId x) {
  ad::Tape& t = ctx.tape;
  const std::int32_t h = ctx.store.hidden();
  const std::int32_t d = ctx.store.dim();
  ad::NodeId hid = t.relu(t.add(t.matvec(ctx.flat_param(base + 0), x, h),
                                ctx.flat_param(base + 1)));
  return t.add(t.matvec(ctx.flat_param(base + 2), hid, d), ctx.flat_param(base + 3));
}

std::vector<ad::NodeId> t_center_weights(TapeCtx& ctx, std::span<const ad::TapeBox> members,
                                         std::span<const ad::NodeId> inputs) {
  ad::Tape& t = ctx.tape;
  const std::size_t n = members.size();
  const std::int32_t d = ctx.store.dim();
  if (ctx.cfg.center_agg == ModelConfig::CenterAgg::avg) {
    std::vector<double> w(d, 1.0 / static_cast<double>(n));
    const ad::NodeId uniform = t.constant(w);
    return std::vector<ad::NodeId>(n, uniform);
  }
  std::vector<ad::NodeId> logits(n);
  if (ctx.cfg.center_agg == ModelConfig::CenterAgg::attention) {
    const std::int32_t net = ctx.cfg.share_set_mlp ? block::kSetInW1 : block::kAttW1;
    for (std::size_t i = 0; i < n; ++i) logits[i] = t_mlp(ctx, net, inputs[i]);
  } else {
    std::vector<ad::NodeId> enc(n);
    for (std::size_t i = 0; i < n; ++i) enc[i] = t_mlp(ctx, block::kCtrInW1, inputs[i]);
    ad::NodeId pool = enc[0];
    for (std::size_t i = 1; i < n; ++i) pool = t.add(pool, enc[i]);
    pool = t.scale(pool, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      logits[i] = t_mlp(ctx, block::kCtrOutW1, t.scale(t.add(enc[i], pool), 0.5));
  }
  ad::NodeId mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = t.maximum(mx, logits[i]);
  std::vector<ad::NodeId> num(n);
  ad::NodeId denom = -1;
  for (std::size_t i = 0; i < n; ++i) {
    num[i] = t.exp_(t.sub(logits[i], mx));
    denom = i == 0 ? num[i] : t.add(denom, num[i]);
  }
  for (std::size_t i = 0; i < n; ++i) num[i] = t.divide(num[i], denom);
  return num;
}

ad::TapeBox t_intersect(TapeCtx& ctx, std::span<const ad::TapeBox> members) {
  ad::Tape& t = ctx.tape;
  const std::size_t n = members.size();
  std::vector<ad::NodeId> inputs(n);
  for (std::size_t i = 0; i < n; ++i) inputs[i] = t.concat(members[i].cen, members[i].lim);
  const auto weights = t_center_weights(ctx, members, inputs);

  ad::TapeBox out;
  if (ctx.cfg.literal_center_sum) {
    ad::NodeId acc = -1;
    for (std::size_t i = 0; i < n; ++i) {
      ad::NodeId scaled = ad::t_mscalar_ew(t, weights[i], members[i].cen, ctx.c);
      acc = i == 0 ? scaled : t.add(acc, scaled);
    }
    out.cen = acc;
  } else {
    ad::NodeId acc = -1;
    for (std::size_t i = 0; i < n; ++i) {
      ad::NodeId tan = ad::t_log0(t, members[i].cen, ctx.c);
      ad::NodeId term = t.mul(weights[i], tan);
      acc = i == 0 ? term : t.add(acc, term);
    }
    out.cen = ad::t_exp0(t, acc, ctx.c);
  }

  ad::NodeId min_lim = members[0].lim;
  for (std::size_t i = 1; i < n; ++i) min_lim = t.minimum(min_lim, members[i].lim);
  if (ctx.cfg.limit_agg == ModelConfig::LimitAgg::min) {
    out.lim = min_lim;
    return out;
  }
  ad::NodeId pool = -1;
  for (std::size_t i = 0; i < n; ++i) {
    ad::NodeId enc = t_mlp(ctx, block::kSetInW1, inputs[i]);
    pool = i == 0 ? enc : t.add(pool, enc);
  }
  pool = t.scale(pool, 1.0 / static_cast<double>(n));
  ad::NodeId sig = t.sigmoid(t_mlp(ctx, block::kSetOutW1, pool));
  out.lim = ad::t_mscalar_ew(t, sig, min_lim, ctx.c);
  return out;
}

}  // namespace

ad::TapeBox t_entity(TapeCtx& ctx, EntityId e) {
  ad::TapeBox box;
  box.cen = ctx.tape.param({block::kEntityCen, e}, ctx.store.row(block::kEntityCen, e));
  box.lim = ctx.tape.param({block::kEntityLim, e}, ctx.store.row(block::kEntityLim, e));
  return box;
}

ad::TapeBox t_embed_query(TapeCtx& ctx, const QueryAst& branch) {
  switch (branch.kind) {
    case QueryAst::Kind::entity:
      return t_entity(ctx, branch.id);
    case QueryAst::Kind::translate: {
      ad::TapeBox child = t_embed_query(ctx, branch.children[0]);
      ad::TapeBox rel;
      rel.cen = ctx.tape.param({block::kRelCen, branch.id},
                               ctx.store.row(block::kRelCen, branch.id));
      rel.lim = ctx.tape.param({block::kRelLim, branch.id},
                               ctx.store.row(block::kRelLim, branch.id));
      return ad::t_translate(ctx.tape, child, rel, ctx.c);
    }
    case QueryAst::Kind::intersect: {
      std::vector<ad::TapeBox> members;
      members.reserve(branch.children.size());
      for (const QueryAst& c : branch.children) members.push_back(t_embed_query(ctx, c));
      return t_intersect(ctx, members);
    }
    case QueryAst::Kind::unite:
      throw UsageError("t_embed_query: branch must be union-free");
  }
  throw UsageError("t_embed_query: invalid node");
}

ad::NodeId t_pair_loss(TapeCtx& ctx, const DnfQuery& dnf, EntityId positive,
                       std::span<const EntityId> negatives) {
  ad::Tape& t = ctx.tape;
  std::vector<ad::Tape::BoxNodes> branches;
  for (const QueryAst& b : dnf.branches) {
    const ad::TapeBox box = t_embed_query(ctx, b);
    branches.push_back(ad::t_corners(t, box, ctx.c));
  }
  std::vector<ad::NodeId> ents;
  ents.reserve(negatives.size() + 1);
  ents.push_back(t.param({block::kEntityCen, positive}, ctx.store.row(block::kEntityCen, positive)));
  for (EntityId e : negatives)
    ents.push_back(t.param({block::kEntityCen, e}, ctx.store.row(block::kEntityCen, e)));

  if (ctx.cfg.dist.reading == DistanceWeights::Reading::elementwise)
    return t.rank_loss(branches, ctx.c, ents, ctx.cfg.dist.gamma, ctx.cfg.margin,
                       ctx.cfg.dist.combine_mode);

  // Literal reading: composite distances with the same loss shape.
  const auto entity_dist = [&](ad::NodeId v) {
    ad::NodeId best = -1;
    for (const auto& box : branches) {
      ad::NodeId d = ad::t_box_dist_composite(t, v, box, ctx.c, ctx.cfg.dist);
      best = best < 0 ? d : t.minimum(best, d);
    }
    return best;
  };
  ad::NodeId loss =
      t.negate(t.log_sigmoid(t.shift(t.negate(entity_dist(ents[0])), ctx.cfg.margin)));
  if (ents.size() > 1) {
    ad::NodeId acc = -1;
    for (std::size_t i = 1; i < ents.size(); ++i) {
      ad::NodeId term = t.log_sigmoid(t.shift(entity_dist(ents[i]), -ctx.cfg.margin));
      acc = acc < 0 ? term : t.add(acc, term);
    }
    loss = t.add(loss, t.scale(acc, -1.0 / static_cast<double>(ents.size() - 1)));
  }
  return loss;
}

double batch_loss_and_grad(const ParameterStore& store, const ModelConfig& cfg,
                           std::span<const TrainPair> pairs, ad::GradientBuffer& grads,
                           int threads) {
  const auto run_chunk = [&](std::span<const TrainPair> chunk, ad::GradientBuffer& sink) {
    ad::Tape tape;
    double loss = 0.0;
    for (const TrainPair& pair : chunk) {
      tape.reset();
      TapeCtx ctx(tape, store, cfg);
      const ad::NodeId root =
          t_pair_loss(ctx, *pair.query, pair.positive, pair.negatives);
      loss += tape.scalar_value(root);
      tape.backward(root, sink);
    }
    return loss;
  };

  const int n_workers =
      std::max(1, std::min<int>(threads, static_cast<int>(pairs.size())));
  if (n_workers == 1) return run_chunk(pairs, grads);

  std::vector<ad::GradientBuffer> partial(n_workers);
  std::vector<double> losses(n_workers, 0.0);
  std::vector<std::exception_ptr> errors(n_workers);
  std::vector<std::thread> workers;
  const std::size_t per = (pairs.size() + n_workers - 1) / n_workers;
  for (int w = 0; w < n_workers; ++w) {
    partial[w].configure(store.shapes());
    workers.emplace_back([&, w] {
      try {
        const std::size_t lo = w * per;
        const std::size_t hi = std::min(pairs.size(), lo + per);
        if (lo < hi) losses[w] = run_chunk(pairs.subspan(lo, hi - lo), partial[w]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : workers) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  double total = 0.0;
  for (int w = 0; w < n_workers; ++w) {
    total += losses[w];
    grads.accumulate(partial[w]);
  }
  return total;
}

}  // namespace horo
