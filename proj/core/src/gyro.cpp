#include "horo/gyro.hpp"

#include <algorithm>

namespace horo {

BallPoint BallPoint::project(std::vector<double> raw) {
  if (!all_finite(raw)) throw NumericError("BallPoint: non-finite coordinates");
  gyro::project_in_place(raw);
  return BallPoint(std::move(raw));
}

TangentVector::TangentVector(std::vector<double> v) : v_(std::move(v)) {
  if (!all_finite(v_)) throw NumericError("TangentVector: non-finite coordinates");
}

namespace gyro {

void project_in_place(std::span<double> x) {
  const double max_norm = 1.0 - kBallEps;
  double n = norm(x);
  while (n >= max_norm && n > 0.0) {
    // Rescale onto the shell; repeat in case rounding lands a hair outside.
    const double s = max_norm / n;
    for (double& v : x) v *= s;
    const double n2 = norm(x);
    if (n2 >= n) {
      for (double& v : x) v *= 1.0 - 1e-15;
    }
    n = norm(x);
  }
}

void mobius_add(std::span<const double> x, std::span<const double> y, double c,
                std::span<double> out) {
  const double xy = dot(x, y);
  const double x2 = norm_sq(x);
  const double y2 = norm_sq(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a * x[i] + b * y[i]) / den;
  project_in_place(out);
}

void mobius_sub(std::span<const double> x, std::span<const double> y, double c,
                std::span<double> out) {
  const double xy = -dot(x, y);
  const double x2 = norm_sq(x);
  const double y2 = norm_sq(y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a * x[i] - b * y[i]) / den;
  project_in_place(out);
}

void exp_map(std::span<const double> base, std::span<const double> v, double c,
             std::span<double> out) {
  const double vn = norm(v);
  if (vn < kTinyNorm) {
    std::copy(base.begin(), base.end(), out.begin());
    return;
  }
  const double sc = std::sqrt(c);
  const double lambda = 2.0 / (1.0 - c * norm_sq(base));
  const double coef = std::tanh(sc * lambda * vn / 2.0) / (sc * vn);
  std::vector<double> step(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) step[i] = coef * v[i];
  mobius_add(base, step, c, out);
}

void log_map(std::span<const double> base, std::span<const double> y, double c,
             std::span<double> out) {
  std::vector<double> u(y.size());
  std::vector<double> neg_base(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) neg_base[i] = -base[i];
  mobius_add(neg_base, y, c, u);
  const double un = norm(u);
  if (un < kTinyNorm) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double sc = std::sqrt(c);
  const double lambda = 2.0 / (1.0 - c * norm_sq(base));
  const double coef = 2.0 / (sc * lambda) * atanh_clamped(sc * un) / un;
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = coef * u[i];
}

void mobius_scalar(double r, std::span<const double> x, double c, std::span<double> out) {
  const double xn = norm(x);
  if (xn < kTinyNorm || r == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double sc = std::sqrt(c);
  const double coef = std::tanh(r * atanh_clamped(sc * xn)) / (sc * xn);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = coef * x[i];
  project_in_place(out);
}

double conformal_factor(std::span<const double> x) { return 2.0 / (1.0 - norm_sq(x)); }

double distance(std::span<const double> x, std::span<const double> y) {
  double diff2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    diff2 += d * d;
  }
  const double arg = 1.0 + 2.0 * diff2 / ((1.0 - norm_sq(x)) * (1.0 - norm_sq(y)));
  return std::acosh(std::max(arg, 1.0));
}

}  // namespace gyro

namespace {

void check_same_dim(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw UsageError(std::string(op) + ": dimension mismatch");
}

}  // namespace

BallPoint mobius_add(const BallPoint& x, const BallPoint& y, const Curvature& c) {
  check_same_dim(x.dim(), y.dim(), "mobius_add");
  std::vector<double> out(x.dim());
  gyro::mobius_add(x.coords(), y.coords(), c.c, out);
  return BallPoint::project(std::move(out));
}

BallPoint mobius_sub(const BallPoint& x, const BallPoint& y, const Curvature& c) {
  check_same_dim(x.dim(), y.dim(), "mobius_sub");
  std::vector<double> out(x.dim());
  gyro::mobius_sub(x.coords(), y.coords(), c.c, out);
  return BallPoint::project(std::move(out));
}

BallPoint exp_map(const BallPoint& base, const TangentVector& v, const Curvature& c) {
  check_same_dim(base.dim(), v.dim(), "exp_map");
  std::vector<double> out(base.dim());
  gyro::exp_map(base.coords(), v.coords(), c.c, out);
  return BallPoint::project(std::move(out));
}

TangentVector log_map(const BallPoint& base, const BallPoint& y, const Curvature& c) {
  check_same_dim(base.dim(), y.dim(), "log_map");
  std::vector<double> out(base.dim());
  gyro::log_map(base.coords(), y.coords(), c.c, out);
  return TangentVector(std::move(out));
}

BallPoint mobius_scalar(double r, const BallPoint& x, const Curvature& c) {
  std::vector<double> out(x.dim());
  gyro::mobius_scalar(r, x.coords(), c.c, out);
  return BallPoint::project(std::move(out));
}

double conformal_factor(const BallPoint& x) { return gyro::conformal_factor(x.coords()); }

double hyp_distance(const BallPoint& x, const BallPoint& y) {
  check_same_dim(x.dim(), y.dim(), "hyp_distance");
  return gyro::distance(x.coords(), y.coords());
}

BallPoint safe_project(std::vector<double> raw) { return BallPoint::project(std::move(raw)); }

BallPoint negate(const BallPoint& x) {
  std::vector<double> out(x.vec());
  for (double& v : out) v = -v;
  return BallPoint::project(std::move(out));
}

}  // namespace horo
