#include <doctest.h>

#include <cmath>
#include <cstring>

#include "horo/tape.hpp"
#include "horo/tape_geo.hpp"

using namespace horo;
using namespace horo::ad;

namespace {

// Tiny two-block registry: block 0 = one row of 2, block 1 = one row of 3.
std::vector<BlockShape> tiny_shapes() { return {{1, 2}, {1, 3}}; }

}  // namespace

TEST_CASE("quadratic loss gradient") {
  Tape t;
  GradientBuffer g;
  g.configure(tiny_shapes());
  const std::vector<double> x{0.3, 0.4};
  const NodeId p = t.param({0, 0}, x);
  const NodeId loss = t.dot(p, p);  // |x|^2
  CHECK(t.scalar_value(loss) == doctest::Approx(0.25));
  t.backward(loss, g);
  CHECK(g.row(0, 0)[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(g.row(0, 0)[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("distance-from-origin gradient matches the closed form") {
  // loss = d(0, x) has d/dx0 = 2/(1 - x0^2) = 3.125 at x0 = 0.6.
  Tape t;
  GradientBuffer g;
  g.configure(tiny_shapes());
  const std::vector<double> origin{0.0, 0.0};
  const std::vector<double> x{0.6, 0.0};
  const NodeId o = t.constant(origin);
  const NodeId p = t.param({0, 0}, x);
  const NodeId loss = t_distance(t, o, p);
  CHECK(t.scalar_value(loss) == doctest::Approx(2.0 * std::atanh(0.6)).epsilon(1e-12));
  t.backward(loss, g);
  CHECK(g.row(0, 0)[0] == doctest::Approx(3.125).epsilon(1e-9));
  CHECK(g.row(0, 0)[1] == doctest::Approx(0.0));
}

TEST_CASE("unreachable parameters keep bitwise-zero gradients") {
  Tape t;
  GradientBuffer g;
  g.configure(tiny_shapes());
  const std::vector<double> x{0.3, 0.4};
  const std::vector<double> unused{1.0, 2.0, 3.0};
  const NodeId p = t.param({0, 0}, x);
  t.param({1, 0}, unused);  // never consumed
  const NodeId loss = t.dot(p, p);
  t.backward(loss, g);
  for (double v : g.row(1, 0)) {
    CHECK(v == 0.0);
    CHECK(!std::signbit(v));
  }
}

TEST_CASE("constant loss has zero gradients") {
  Tape t;
  GradientBuffer g;
  g.configure(tiny_shapes());
  const std::vector<double> x{0.3, 0.4};
  const NodeId p = t.param({0, 0}, x);
  const NodeId loss = t.sum(t.scale(p, 0.0));
  t.backward(loss, g);
  CHECK(g.row(0, 0)[0] == 0.0);
  CHECK(g.row(0, 0)[1] == 0.0);
}

TEST_CASE("identical tapes produce bitwise-identical gradients") {
  const auto run = [] {
    Tape t;
    GradientBuffer g;
    g.configure(tiny_shapes());
    const std::vector<double> x{0.21, -0.37};
    const std::vector<double> y{0.11, 0.4, -0.2};
    const NodeId px = t.param({0, 0}, x);
    const NodeId py = t.param({1, 0}, y);
    const NodeId c = t.constant_scalar(1.0);
    const NodeId ma = t_mobius_add(t, px, t.constant(std::vector<double>{0.1, 0.2}), c);
    const NodeId loss = t.add(t.dot(ma, ma), t.sum(t.tanh_(py)));
    t.backward(loss, g);
    return std::vector<double>{g.row(0, 0)[0], g.row(0, 0)[1], g.row(1, 0)[0],
                               g.row(1, 0)[1], g.row(1, 0)[2]};
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::memcmp(&a[i], &b[i], sizeof(double)) == 0);
  }
}

TEST_CASE("non-finite values report the offending node") {
  Tape t;
  GradientBuffer g;
  g.configure(tiny_shapes());
  const std::vector<double> x{0.0, 0.0};
  const NodeId p = t.param({0, 0}, x);
  const NodeId bad = t.divide(p, p);  // 0/0
  const NodeId loss = t.sum(bad);
  CHECK_THROWS_AS(t.backward(loss, g), NumericError);
}

namespace {

// Central-difference probe for a scalar function of one flat input block.
template <typename BuildFn>
void check_grad_fd(BuildFn build, std::vector<double> x, double tol = 1e-6) {
  std::vector<BlockShape> shapes{{1, static_cast<std::int32_t>(x.size())}};
  GradientBuffer g;
  g.configure(shapes);
  {
    Tape t;
    const NodeId loss = build(t, x);
    t.backward(loss, g);
  }
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    Tape tp;
    const double fp = tp.scalar_value(build(tp, x));
    x[i] = saved - h;
    Tape tm;
    const double fm = tm.scalar_value(build(tm, x));
    x[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = g.row(0, 0)[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    CHECK(std::abs(numeric - analytic) / denom < tol);
  }
}

}  // namespace

TEST_CASE("fused region distance agrees with the composite graph") {
  // Same inputs through the fused op and the primitive composite must give
  // identical forward values and matching gradients.
  const std::vector<double> packed{0.15, -0.2, /*lim*/ 0.25, 0.1, /*v*/ 0.4, -0.45};
  for (const auto combine :
       {DistanceWeights::Combine::euclidean, DistanceWeights::Combine::mobius}) {
    std::vector<double> g_fused(6), g_comp(6);
    double f_fused = 0.0, f_comp = 0.0;
    for (int mode = 0; mode < 2; ++mode) {
      Tape t;
      GradientBuffer g;
      g.configure({{1, 6}});
      const NodeId p = t.param({0, 0}, packed);
      // Slice the packed parameter through constant masks.
      const auto slice = [&](int offset) {
        std::vector<double> mask(6, 0.0);
        NodeId acc = -1;
        for (int j = 0; j < 2; ++j) {
          std::fill(mask.begin(), mask.end(), 0.0);
          mask[offset + j] = 1.0;
          const NodeId picked = t.dot(p, t.constant(mask));
          acc = j == 0 ? picked : t.concat(acc, picked);
        }
        return acc;
      };
      const NodeId cen = slice(0);
      const NodeId lim = slice(2);
      const NodeId v = slice(4);
      const NodeId c = t.constant_scalar(1.0);
      const auto box = t_corners(t, {cen, lim}, c);
      NodeId dist;
      if (mode == 0) {
        dist = t.box_dist(v, box, c, 0.5, combine);
      } else {
        DistanceWeights w;
        w.combine_mode = combine;
        dist = t_box_dist_composite(t, v, box, c, w);
      }
      t.backward(dist, g);
      auto& dst = mode == 0 ? g_fused : g_comp;
      std::copy(g.row(0, 0).begin(), g.row(0, 0).end(), dst.begin());
      (mode == 0 ? f_fused : f_comp) = t.scalar_value(dist);
    }
    CHECK(f_fused == f_comp);  // shared kernel: bit-identical forward
    for (int i = 0; i < 6; ++i) CHECK(g_fused[i] == doctest::Approx(g_comp[i]).epsilon(1e-10));
  }
}

TEST_CASE("fused rank loss gradients pass finite differences") {
  // One branch, one positive, two negatives; every input in a single block.
  // Layout: cen(2) lim(2) pos(2) neg1(2) neg2(2) c(1).
  const auto build = [](Tape& t, const std::vector<double>& x) {
    const NodeId p = t.param({0, 0}, x);
    const auto slice = [&](int offset, int len) {
      NodeId acc = -1;
      std::vector<double> mask(x.size(), 0.0);
      for (int j = 0; j < len; ++j) {
        std::fill(mask.begin(), mask.end(), 0.0);
        mask[offset + j] = 1.0;
        const NodeId picked = t.dot(p, t.constant(mask));
        acc = j == 0 ? picked : t.concat(acc, picked);
      }
      return acc;
    };
    const NodeId cen = slice(0, 2);
    const NodeId lim = slice(2, 2);
    const NodeId c = slice(10, 1);
    const auto box = t_corners(t, {cen, lim}, c);
    const std::vector<Tape::BoxNodes> branches{box};
    const std::vector<NodeId> ents{slice(4, 2), slice(6, 2), slice(8, 2)};
    return t.rank_loss(branches, c, ents, 0.5, 2.0, DistanceWeights::Combine::euclidean);
  };
  check_grad_fd(build, {0.1, -0.15, 0.2, 0.15, 0.35, -0.1, -0.4, 0.3, 0.05, 0.6, 1.0}, 1e-5);
}

TEST_CASE("rank loss minimum over branches routes to the closer branch") {
  // Two branches; the positive sits inside branch B, so branch A's corner
  // parameters must receive no gradient from the positive term.
  Tape t;
  GradientBuffer g;
  g.configure({{1, 2}, {1, 2}});
  const std::vector<double> cen_a{0.6, 0.6};
  const std::vector<double> cen_b{0.1, 0.1};
  const NodeId pa = t.param({0, 0}, cen_a);
  const NodeId pb = t.param({1, 0}, cen_b);
  const NodeId lim = t.constant(std::vector<double>{0.05, 0.05});
  const NodeId c = t.constant_scalar(1.0);
  const auto box_a = t_corners(t, {pa, lim}, c);
  const auto box_b = t_corners(t, {pb, lim}, c);
  const std::vector<Tape::BoxNodes> branches{box_a, box_b};
  const NodeId pos = t.constant(std::vector<double>{0.1, 0.1});
  const std::vector<NodeId> ents{pos};
  const NodeId loss =
      t.rank_loss(branches, c, ents, 0.5, 2.0, DistanceWeights::Combine::euclidean);
  t.backward(loss, g);
  CHECK(g.row(0, 0)[0] == 0.0);
  CHECK(g.row(0, 0)[1] == 0.0);
}

TEST_CASE("elementary op gradients against finite differences") {
  Rng rng(5150);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-0.8, 0.8);
    check_grad_fd(
        [](Tape& t, const std::vector<double>& in) {
          const NodeId p = t.param({0, 0}, in);
          const NodeId a = t.tanh_(p);
          const NodeId b = t.sigmoid(t.scale(p, 1.7));
          const NodeId m = t.maximum(a, b);
          const NodeId s = t.mul(m, t.exp_(t.scale(p, -0.3)));
          return t.add(t.sum(s), t.log_sigmoid(t.dot(a, b)));
        },
        x, 1e-5);
  }
}
