#include <doctest.h>

#include <cmath>
#include <cstring>

#include "horo/optim.hpp"
#include "horo/synth.hpp"
#include "horo/trainer.hpp"

using namespace horo;

namespace {

ParameterStore tiny_store(std::uint64_t seed) {
  ParameterStore store(2, 4, 4, 2, Curvature{});
  init_params(store, seed);
  return store;
}

}  // namespace

TEST_CASE("riemannian gradient rescaling") {
  std::vector<double> g{1.0, 2.0};
  std::vector<double> out(2);

  std::vector<double> origin{0.0, 0.0};
  riemannian_scale(g, origin, out);
  CHECK(out[0] == doctest::Approx(0.25).epsilon(1e-15));  // lambda_0 = 2
  CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-15));

  // Near the boundary the scale collapses.
  std::vector<double> edge{0.99999, 0.0};
  riemannian_scale(g, edge, out);
  CHECK(out[0] < 1e-9);

  std::vector<double> zero{0.0, 0.0};
  riemannian_scale(zero, origin, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("zero gradients leave parameters unchanged") {
  ParameterStore store = tiny_store(1);
  const ParameterStore before = store;
  OptimState state;
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  optim_step(store, grads, state);
  CHECK(state.step_count == 1);
  for (std::int32_t b = 0; b < block::kCount; ++b)
    CHECK(std::memcmp(store.flat(b).data(), before.flat(b).data(),
                      store.flat(b).size() * sizeof(double)) == 0);
}

TEST_CASE("lr zero is the identity") {
  ParameterStore store = tiny_store(2);
  const ParameterStore before = store;
  OptimState state;
  state.lr = 0.0;
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  for (double& g : grads.block(block::kEntityCen)) g = 0.7;
  for (double& g : grads.block(block::kAttW1)) g = -0.3;
  optim_step(store, grads, state);
  for (std::int32_t b = 0; b < block::kCount; ++b)
    CHECK(std::memcmp(store.flat(b).data(), before.flat(b).data(),
                      store.flat(b).size() * sizeof(double)) == 0);
}

TEST_CASE("one-step hand simulation at the origin") {
  // A fresh Adam step on a ball row at the origin with unit gradient moves
  // the point by about tanh(lr) against the gradient: the rescaled gradient
  // is 1/4, bias-corrected moments give a direction of norm ~1, and the
  // retraction is exp_0(-lr * direction).
  ParameterStore store(1, 4, 1, 1, Curvature{});
  // all parameters start at zero
  OptimState state;
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  grads.row(block::kEntityCen, 0)[0] = 1.0;
  optim_step(store, grads, state);
  const double moved = store.row(block::kEntityCen, 0)[0];
  CHECK(moved < 0.0);  // against the gradient
  CHECK(std::abs(-moved - std::tanh(1e-4)) < 1e-8);
}

TEST_CASE("limit coordinates clamp at zero") {
  ParameterStore store = tiny_store(3);
  store.row(block::kEntityLim, 0)[0] = 0.0;
  OptimState state;
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  grads.row(block::kEntityLim, 0)[0] = 1.0;  // pushes the limit negative
  optim_step(store, grads, state);
  const double v = store.row(block::kEntityLim, 0)[0];
  CHECK(v == 0.0);
  CHECK(!std::signbit(v));
}

TEST_CASE("parameters stay on their manifolds across many steps") {
  ParameterStore store = tiny_store(4);
  OptimState state;
  state.lr = 0.05;  // large steps stress the projections
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  Rng rng(9);
  for (int step = 0; step < 200; ++step) {
    for (std::int32_t b = 0; b < block::kCount; ++b)
      for (double& g : grads.block(b)) g = rng.uniform(-1.0, 1.0);
    optim_step(store, grads, state);
    for (std::int32_t r = 0; r < store.shape(block::kEntityCen).rows; ++r)
      CHECK(norm(store.row(block::kEntityCen, r)) <= 1.0 - kBallEps + 1e-15);
    for (std::int32_t r = 0; r < store.shape(block::kRelCen).rows; ++r)
      CHECK(norm(store.row(block::kRelCen, r)) <= 1.0 - kBallEps + 1e-15);
    for (double v : store.flat(block::kEntityLim)) CHECK(v >= 0.0);
    for (double v : store.flat(block::kRelLim)) CHECK(v >= 0.0);
  }
  CHECK(state.step_count == 200);
}

TEST_CASE("descent on a one-dimensional target distance") {
  // Fixed toy objective: move x toward t under d(x, t)^2; the loss must not
  // increase over any 10-step window.
  ParameterStore store(1, 4, 1, 1, Curvature{});
  store.row(block::kEntityCen, 0)[0] = -0.3;
  const std::vector<double> target{0.6};

  OptimState state;
  // Small enough that 100 steps stay short of the optimum (no ringing).
  state.lr = 0.005;
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());

  std::vector<double> losses;
  for (int step = 0; step < 100; ++step) {
    ad::Tape tape;
    const ad::NodeId x =
        tape.param({block::kEntityCen, 0}, store.row(block::kEntityCen, 0));
    const ad::NodeId t = tape.constant(target);
    const ad::NodeId d = ad::t_distance(tape, x, t);
    const ad::NodeId loss = tape.mul(d, d);
    losses.push_back(tape.scalar_value(loss));
    grads.zero();
    tape.backward(loss, grads);
    optim_step(store, grads, state);
  }
  for (std::size_t i = 0; i + 10 < losses.size(); ++i) CHECK(losses[i + 10] <= losses[i] + 1e-12);
  CHECK(losses.back() < 0.7 * losses.front());
}

TEST_CASE("non-finite gradients name the parameter block") {
  ParameterStore store = tiny_store(5);
  OptimState state;
  state.configure(store);
  ad::GradientBuffer grads;
  grads.configure(store.shapes());
  grads.row(block::kRelCen, 0)[0] = std::nan("");
  try {
    optim_step(store, grads, state);
    CHECK(false);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("rel_cen") != std::string::npos);
  }
}

TEST_CASE("training is bitwise deterministic") {
  const TripleStore tree = gen_tree({3, 2, DepthMode::per_level, 0});
  RunConfig cfg;
  cfg.model.d = 4;
  cfg.model.negatives = 8;
  cfg.queries_per_structure = 20;
  cfg.query_mix = {StructureTag::t1, StructureTag::i2, StructureTag::up};
  cfg.epochs = 3;
  cfg.batch = 16;
  cfg.split = {1.0, 0.0, 0.0};
  cfg.seed = 77;
  cfg.deterministic = true;
  cfg.threads = 1;

  const TrainResult a = train_on_store(tree, cfg);
  const TrainResult b = train_on_store(tree, cfg);
  for (std::int32_t blk = 0; blk < block::kCount; ++blk) {
    const auto xa = a.checkpoint.params.flat(blk);
    const auto xb = b.checkpoint.params.flat(blk);
    REQUIRE(xa.size() == xb.size());
    CHECK(std::memcmp(xa.data(), xb.data(), xa.size() * sizeof(double)) == 0);
  }
}
