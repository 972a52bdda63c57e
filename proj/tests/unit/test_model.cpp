#include <doctest.h>

#include <cmath>
#include <cstring>

#include "horo/model.hpp"
#include "horo/synth.hpp"

using namespace horo;

namespace {

ParameterStore small_store(std::uint64_t seed, std::int32_t d = 4, std::int32_t entities = 8,
                           std::int32_t relations = 3) {
  ParameterStore store(d, 2 * d, entities, relations, Curvature{});
  init_params(store, seed);
  return store;
}

ModelConfig small_cfg(std::int32_t d = 4) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.negatives = 4;
  return cfg;
}

void set_region(ParameterStore& store, EntityId e, std::vector<double> cen,
                std::vector<double> lim) {
  std::copy(cen.begin(), cen.end(), store.row(block::kEntityCen, e).begin());
  std::copy(lim.begin(), lim.end(), store.row(block::kEntityLim, e).begin());
}

}  // namespace

TEST_CASE("entity leaves embed verbatim") {
  ParameterStore store = small_store(1);
  const ModelConfig cfg = small_cfg();
  const Hyperboloid direct = store.entity(3);
  const Hyperboloid via_query = embed_query(store, cfg, QueryAst::entity(3));
  CHECK(direct.cen == via_query.cen);
  CHECK(direct.lim == via_query.lim);
}

TEST_CASE("zero relation translates to the identity") {
  ParameterStore store = small_store(2);
  const ModelConfig cfg = small_cfg();
  std::fill(store.row(block::kRelCen, 0).begin(), store.row(block::kRelCen, 0).end(), 0.0);
  std::fill(store.row(block::kRelLim, 0).begin(), store.row(block::kRelLim, 0).end(), 0.0);
  const Hyperboloid e = store.entity(2);
  const Hyperboloid moved =
      embed_query(store, cfg, QueryAst::translate(QueryAst::entity(2), 0));
  for (std::int32_t j = 0; j < store.dim(); ++j) {
    CHECK(moved.cen[j] == e.cen[j]);
    CHECK(moved.lim[j] == e.lim[j]);
  }
}

TEST_CASE("intersecting identical members keeps the center, shrinks the limit") {
  ParameterStore store = small_store(3);
  for (const auto mode : {ModelConfig::CenterAgg::avg, ModelConfig::CenterAgg::attention,
                          ModelConfig::CenterAgg::deepsets}) {
    ModelConfig cfg = small_cfg();
    cfg.center_agg = mode;
    const Hyperboloid member = store.entity(1);
    const std::vector<Hyperboloid> members{member, member};
    const Hyperboloid out = intersect_members(store, cfg, members);
    for (std::int32_t j = 0; j < store.dim(); ++j) {
      CHECK(out.cen[j] == doctest::Approx(member.cen[j]).epsilon(1e-12));
      CHECK(out.lim[j] <= member.lim[j] + 1e-15);
      if (member.lim[j] > 1e-6) CHECK(out.lim[j] < member.lim[j]);
    }
  }
}

TEST_CASE("single-member aggregation returns the member center exactly") {
  ParameterStore store = small_store(4);
  const ModelConfig cfg = small_cfg();
  const Hyperboloid m = store.entity(5);
  const std::vector<Hyperboloid> members{m};
  const BallPoint agg =
      aggregate_centers(store, cfg, members, ModelConfig::CenterAgg::attention);
  CHECK(agg == m.cen);
}

TEST_CASE("avg aggregation of antipodal points is the origin") {
  ParameterStore store = small_store(5, 2);
  ModelConfig cfg = small_cfg(2);
  set_region(store, 0, {0.4, 0.0}, {0.0, 0.0});
  set_region(store, 1, {-0.4, 0.0}, {0.0, 0.0});
  const std::vector<Hyperboloid> members{store.entity(0), store.entity(1)};
  const BallPoint agg = aggregate_centers(store, cfg, members, ModelConfig::CenterAgg::avg);
  CHECK(norm(agg.coords()) < 1e-12);
}

TEST_CASE("attention weights sum to one per dimension") {
  ParameterStore store = small_store(6);
  const ModelConfig cfg = small_cfg();
  // Weights are implicit; probe them through the shrinkage identity: feed
  // members with identical centers but different limits, so any weight
  // deviation shows up as center drift.
  const std::vector<Hyperboloid> identical{store.entity(0), store.entity(0), store.entity(0)};
  const BallPoint agg =
      aggregate_centers(store, cfg, identical, ModelConfig::CenterAgg::attention);
  for (std::int32_t j = 0; j < store.dim(); ++j)
    CHECK(agg[j] == doctest::Approx(store.entity(0).cen[j]).epsilon(1e-12));
}

TEST_CASE("saturated attention collapses onto one member") {
  // Craft the logits net so member centers' first coordinate dominates: the
  // hidden layer copies coordinate 0 scaled hugely, so softmax saturates and
  // the aggregate lands on the high-logit member's center.
  ParameterStore store = small_store(21, 2, 4, 1);
  ModelConfig cfg = small_cfg(2);
  for (std::int32_t b = block::kAttW1; b <= block::kAttB2; ++b)
    for (double& v : store.flat(b)) v = 0.0;
  store.flat(block::kAttW1)[0] = 200.0;  // hidden0 = relu(200 * cen[0])
  store.flat(block::kAttW2)[0] = 1.0;    // logit dim 0 <- hidden0 (row 0 of 2x4)
  store.flat(block::kAttW2)[4] = 1.0;    // logit dim 1 <- hidden0 (row 1 of 2x4)

  set_region(store, 0, {0.5, 0.1}, {0.0, 0.0});
  set_region(store, 1, {-0.5, -0.2}, {0.0, 0.0});
  const std::vector<Hyperboloid> members{store.entity(0), store.entity(1)};
  const BallPoint agg =
      aggregate_centers(store, cfg, members, ModelConfig::CenterAgg::attention);
  CHECK(std::abs(agg[0] - 0.5) < 1e-6);
  CHECK(std::abs(agg[1] - 0.1) < 1e-6);
}

TEST_CASE("limit shrink factor follows the 1-D gyro scaling") {
  // With min-limit 0.2 and a sigmoid gate of exactly 0.5 the shrunken limit
  // is tanh(0.5 artanh 0.2) = 0.10102.
  CHECK(gyro::mobius_scalar_1d(0.5, 0.2, 1.0) ==
        doctest::Approx(std::tanh(0.5 * std::atanh(0.2))).epsilon(1e-12));
}

TEST_CASE("intersection shrinkage dominates the member minimum") {
  ParameterStore store = small_store(7);
  const ModelConfig cfg = small_cfg();
  Rng rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Hyperboloid> members;
    const std::size_t arity = 2 + rng.next_below(2);
    for (std::size_t i = 0; i < arity; ++i)
      members.push_back(store.entity(static_cast<EntityId>(rng.next_below(8))));
    const Hyperboloid out = intersect_members(store, cfg, members);
    for (std::int32_t j = 0; j < store.dim(); ++j) {
      double min_lim = members[0].lim[j];
      for (const auto& m : members) min_lim = std::min(min_lim, m.lim[j]);
      CHECK(out.lim[j] <= min_lim + 1e-15);
    }
  }
}

TEST_CASE("permutation invariance of intersection") {
  ParameterStore store = small_store(8);
  const ModelConfig cfg = small_cfg();
  const std::vector<Hyperboloid> abc{store.entity(0), store.entity(1), store.entity(2)};
  const std::vector<Hyperboloid> cab{store.entity(2), store.entity(0), store.entity(1)};
  const Hyperboloid x = intersect_members(store, cfg, abc);
  const Hyperboloid y = intersect_members(store, cfg, cab);
  for (std::int32_t j = 0; j < store.dim(); ++j) {
    CHECK(x.cen[j] == doctest::Approx(y.cen[j]).epsilon(1e-9));
    CHECK(x.lim[j] == doctest::Approx(y.lim[j]).epsilon(1e-9));
  }
}

TEST_CASE("scoring semantics") {
  ParameterStore store = small_store(9);
  const ModelConfig cfg = small_cfg();

  // An entity scored against itself sits inside its own region.
  CHECK(score(store, cfg, QueryAst::entity(2), 2) == 0.0);

  // Union scores are the branch minimum, exactly.
  const QueryAst u = QueryAst::unite({QueryAst::entity(0), QueryAst::entity(1)});
  const double su = score(store, cfg, u, 5);
  const double s0 = score(store, cfg, QueryAst::entity(0), 5);
  const double s1 = score(store, cfg, QueryAst::entity(1), 5);
  CHECK(su == std::min(s0, s1));
}

TEST_CASE("scoring a pre-rewritten query is bit-identical") {
  ParameterStore store = small_store(10);
  const ModelConfig cfg = small_cfg();
  const QueryAst q = QueryAst::translate(
      QueryAst::unite({QueryAst::entity(0), QueryAst::entity(1)}), 0);
  const DnfQuery dnf = to_dnf(q);
  REQUIRE(dnf.branches.size() == 2);
  const QueryAst pre = QueryAst::unite({dnf.branches[0], dnf.branches[1]});
  for (EntityId e = 0; e < store.entity_count(); ++e) {
    const double a = score(store, cfg, q, e);
    const double b = score(store, cfg, pre, e);
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
  }
}

TEST_CASE("tape and plain scoring agree") {
  ParameterStore store = small_store(11);
  ModelConfig cfg = small_cfg();
  const QueryAst q = QueryAst::intersect(
      {QueryAst::translate(QueryAst::entity(0), 0), QueryAst::translate(QueryAst::entity(1), 1)});
  const DnfQuery dnf = to_dnf(q);
  for (const auto agg : {ModelConfig::CenterAgg::avg, ModelConfig::CenterAgg::attention,
                         ModelConfig::CenterAgg::deepsets}) {
    cfg.center_agg = agg;
    const Hyperboloid plain = embed_query(store, cfg, dnf.branches[0]);
    ad::Tape tape;
    TapeCtx ctx(tape, store, cfg);
    const ad::TapeBox traced = t_embed_query(ctx, dnf.branches[0]);
    for (std::int32_t j = 0; j < store.dim(); ++j) {
      CHECK(tape.value(traced.cen)[j] == doctest::Approx(plain.cen[j]).epsilon(1e-9));
      CHECK(tape.value(traced.lim)[j] == doctest::Approx(plain.lim[j]).epsilon(1e-9));
    }
  }
}

TEST_CASE("pair loss closed forms") {
  // score(pos) = 0 and far negatives at margin 6: loss = -log sig(6) per
  // positive; score(pos) = score(neg) = margin: loss = 2 ln 2.
  CHECK(-stable_log_sigmoid(6.0) == doctest::Approx(0.00247568514).epsilon(1e-6));
  CHECK((-stable_log_sigmoid(0.0) - stable_log_sigmoid(0.0)) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  ParameterStore store = small_store(12, 2, 4, 1);
  ModelConfig cfg = small_cfg(2);
  cfg.margin = 6.0;
  // Positive inside its own region, one far-away negative.
  set_region(store, 0, {0.0, 0.0}, {0.1, 0.1});
  set_region(store, 1, {0.9, 0.0}, {0.0, 0.0});
  DnfQuery dnf = to_dnf(QueryAst::entity(0));
  TrainPair pair;
  pair.query = &dnf;
  pair.positive = 0;
  pair.negatives = {1};
  const double neg_score = score(store, cfg, QueryAst::entity(0), 1);
  const double expected =
      -stable_log_sigmoid(6.0) - stable_log_sigmoid(neg_score - 6.0);
  CHECK(training_loss(store, cfg, std::vector<TrainPair>{pair}) ==
        doctest::Approx(expected).epsilon(1e-12));

  // Empty pair set contributes nothing.
  CHECK(training_loss(store, cfg, std::vector<TrainPair>{}) == 0.0);
}

TEST_CASE("plain and tape losses agree") {
  ParameterStore store = small_store(13);
  ModelConfig cfg = small_cfg();
  const QueryAst q = QueryAst::translate(
      QueryAst::unite({QueryAst::entity(0), QueryAst::entity(1)}), 0);
  DnfQuery dnf = to_dnf(q);
  TrainPair pair;
  pair.query = &dnf;
  pair.positive = 2;
  pair.negatives = {3, 4, 5};
  const double plain = training_loss(store, cfg, std::vector<TrainPair>{pair});

  ad::Tape tape;
  TapeCtx ctx(tape, store, cfg);
  const ad::NodeId root = t_pair_loss(ctx, dnf, pair.positive, pair.negatives);
  CHECK(tape.scalar_value(root) == doctest::Approx(plain).epsilon(1e-10));
}

TEST_CASE("translation-only batches leave aggregation nets untouched") {
  ParameterStore store = small_store(14);
  ModelConfig cfg = small_cfg();
  DnfQuery dnf = to_dnf(QueryAst::translate(QueryAst::entity(0), 1));
  TrainPair pair;
  pair.query = &dnf;
  pair.positive = 1;
  pair.negatives = {2, 3};

  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  batch_loss_and_grad(store, cfg, std::vector<TrainPair>{pair}, grads);

  for (std::int32_t b = block::kAttW1; b <= block::kCtrOutB2; ++b)
    for (double g : grads.block(b)) {
      CHECK(g == 0.0);
      CHECK(!std::signbit(g));
    }
  // The touched relation and entities do receive gradients.
  double rel_norm = 0.0;
  for (double g : grads.row(block::kRelCen, 1)) rel_norm += std::abs(g);
  CHECK(rel_norm > 0.0);
}

TEST_CASE("worker-chunked gradients match the serial path") {
  ParameterStore store = small_store(15);
  ModelConfig cfg = small_cfg();
  DnfQuery dnf = to_dnf(QueryAst::translate(QueryAst::entity(0), 0));
  std::vector<TrainPair> pairs;
  for (int i = 0; i < 6; ++i) {
    TrainPair p;
    p.query = &dnf;
    p.positive = 1 + i % 3;
    p.negatives = {4, 5};
    pairs.push_back(p);
  }
  ad::GradientBuffer serial, chunked;
  serial.configure(store.shapes());
  chunked.configure(store.shapes());
  const double l1 = batch_loss_and_grad(store, cfg, pairs, serial, 1);
  const double l2 = batch_loss_and_grad(store, cfg, pairs, chunked, 3);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  for (std::int32_t b = 0; b < block::kCount; ++b)
    for (std::size_t i = 0; i < serial.block(b).size(); ++i)
      CHECK(serial.block(b)[i] == doctest::Approx(chunked.block(b)[i]).epsilon(1e-12));
}

TEST_CASE("semantic initialization seeds centers from vectors") {
  SemanticVectors vecs;
  vecs.dim = 4;
  for (EntityId e = 0; e < 8; ++e) {
    std::vector<double> v(4, 0.0);
    if (e != 2) v[e % 4] = e + 1.0;  // entity 2 gets the zero vector
    vecs.vectors[e] = v;
  }
  ParameterStore store(4, 8, 8, 3, Curvature{});
  init_params_semantic(store, 99, vecs, 0.5);

  // Non-zero vectors land at exp0(0.5 * min(|v|,1) * v/|v|).
  const auto row = store.row(block::kEntityCen, 1);
  CHECK(row[1] == doctest::Approx(std::tanh(0.5)).epsilon(1e-9));
  // Zero vector: falls back to the default jitter (same as plain init).
  ParameterStore plain(4, 8, 8, 3, Curvature{});
  init_params(plain, 99);
  CHECK(store.row(block::kEntityCen, 2)[0] == plain.row(block::kEntityCen, 2)[0]);

  SemanticVectors wrong;
  wrong.dim = 3;
  CHECK_THROWS_AS(init_params_semantic(store, 99, wrong, 0.5), DataError);
}
