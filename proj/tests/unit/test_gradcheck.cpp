#include <doctest.h>

#include "horo/gradcheck.hpp"

using namespace horo;

TEST_CASE("linear losses pass finite differences tightly") {
  ParameterStore store(4, 8, 2, 1, Curvature{});
  init_params(store, 5);
  const LossBuilder builder = [](ad::Tape& t, const ParameterStore& s) {
    const std::vector<double> w{0.3, -0.7, 1.1, 0.4};
    return t.dot(t.param({block::kAttB2, 0}, s.flat(block::kAttB2)), t.constant(w));
  };
  const auto result = finite_diff_check(builder, store);
  CHECK(result.max_rel_err < 1e-10);
  CHECK(result.coords_checked > 0);
}

TEST_CASE("constant losses report zero error") {
  ParameterStore store(4, 8, 2, 1, Curvature{});
  init_params(store, 6);
  const LossBuilder builder = [](ad::Tape& t, const ParameterStore& s) {
    return t.scale(t.sum(t.param({block::kAttB2, 0}, s.flat(block::kAttB2))), 0.0);
  };
  const auto result = finite_diff_check(builder, store);
  CHECK(result.max_rel_err == 0.0);
}

TEST_CASE("boundary-adjacent ball rows shrink the step and pass") {
  ParameterStore store(2, 4, 2, 1, Curvature{});
  init_params(store, 7);
  // Park one center almost on the projection shell so +h leaves the ball.
  auto row = store.row(block::kEntityCen, 0);
  row[0] = 1.0 - kBallEps - 5e-7;
  row[1] = 0.0;
  const LossBuilder builder = [](ad::Tape& t, const ParameterStore& s) {
    const ad::NodeId x = t.param({block::kEntityCen, 0}, s.row(block::kEntityCen, 0));
    return t.dot(x, x);
  };
  const auto result = finite_diff_check(builder, store, 1e-6);
  CHECK(result.max_rel_err < 1e-4);
}

TEST_CASE("a deliberately wrong adjoint is caught") {
  ParameterStore store(4, 8, 2, 1, Curvature{});
  init_params(store, 8);
  // loss = sum(2x) but pretend it is sum(x) by scaling after a detached
  // reconstruction: emulate with mismatched constants in two paths.
  const LossBuilder builder = [](ad::Tape& t, const ParameterStore& s) {
    const ad::NodeId x = t.param({block::kAttB2, 0}, s.flat(block::kAttB2));
    // tanh'(x) adjoint is exercised; corrupting the value by evaluating at a
    // shifted point makes analytic != numeric.
    return t.sum(t.tanh_(t.shift(t.scale(x, 1.0), 0.0)));
  };
  // Sanity: the correct graph passes...
  CHECK(finite_diff_check(builder, store).max_rel_err < 1e-6);
  // ...and perturbing the stored value between forward and FD evaluations
  // (a stale-cache bug) is caught.
  bool first = true;
  const LossBuilder stale = [&first](ad::Tape& t, const ParameterStore& s) {
    std::vector<double> v(s.flat(block::kAttB2).begin(), s.flat(block::kAttB2).end());
    if (!first)
      for (double& x : v) x += 0.05;  // later evaluations see shifted params
    first = false;
    return t.sum(t.tanh_(t.param({block::kAttB2, 0}, v)));
  };
  CHECK(finite_diff_check(stale, store).max_rel_err > 1e-3);
}

TEST_CASE("the operation suite passes at the acceptance tolerance") {
  // Reduced configuration count; the acceptance run uses 100.
  const GradientReport report = run_gradcheck_suite(20240818, 8);
  CHECK(report.entries.size() >= 25);
  for (const auto& e : report.entries) {
    INFO(e.name);
    CHECK(e.max_rel_err < 1e-4);
  }
  const std::string table = format_report(report);
  CHECK(table.find("overall max relative error") != std::string::npos);
}
