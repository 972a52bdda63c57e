#include "horo/hyperboloid.hpp"

#include <algorithm>
#include <cmath>

namespace horo {

Hyperboloid::Hyperboloid(BallPoint center, std::vector<double> limit)
    : cen(std::move(center)), lim(std::move(limit)) {
  if (cen.dim() != lim.size()) throw UsageError("Hyperboloid: cen/lim dimension mismatch");
  for (double l : lim) {
    if (!std::isfinite(l)) throw NumericError("Hyperboloid: non-finite limit");
    if (l < 0.0) throw NumericError("Hyperboloid: negative limit");
  }
}

Corners corners(const Hyperboloid& q, const Curvature& c) {
  Corners out;
  out.q_min.resize(q.dim());
  out.q_max.resize(q.dim());
  for (std::size_t j = 0; j < q.dim(); ++j) {
    const double l = q.lim[j];
    if (std::abs(l) >= 1.0) throw NumericError("corners: limit coordinate outside (-1,1)");
    out.q_min[j] = gyro::mobius_sub_1d(q.cen[j], l, c.c);
    out.q_max[j] = gyro::mobius_add_1d(q.cen[j], l, c.c);
  }
  return out;
}

namespace {

double dist_outside_elementwise(std::span<const double> v, const Corners& cr, double c) {
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    s += std::max(gyro::mobius_sub_1d(v[j], cr.q_max[j], c), 0.0);
    s += std::max(gyro::mobius_sub_1d(cr.q_min[j], v[j], c), 0.0);
  }
  return s;
}

double dist_inside_elementwise(std::span<const double> v, std::span<const double> cen,
                               const Corners& cr, double c) {
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double clamped = std::min(cr.q_max[j], std::max(cr.q_min[j], v[j]));
    s += std::abs(gyro::mobius_sub_1d(cen[j], clamped, c));
  }
  return s;
}

}  // namespace

double dist_outside(const BallPoint& v, const Hyperboloid& q, const Curvature& c,
                    DistanceWeights::Reading reading) {
  if (v.dim() != q.dim()) throw UsageError("dist_outside: dimension mismatch");
  const Corners cr = corners(q, c);
  if (reading == DistanceWeights::Reading::elementwise)
    return dist_outside_elementwise(v.coords(), cr, c.c);
  // Literal reading: scalar geodesic distances to the corner points; the
  // outer max is redundant (distances are nonnegative) and the L1 norm of a
  // scalar is its absolute value.
  return gyro::distance(v.coords(), cr.q_max) + gyro::distance(cr.q_min, v.coords());
}

double dist_inside(const BallPoint& v, const Hyperboloid& q, const Curvature& c,
                   DistanceWeights::Reading reading) {
  if (v.dim() != q.dim()) throw UsageError("dist_inside: dimension mismatch");
  const Corners cr = corners(q, c);
  if (reading == DistanceWeights::Reading::elementwise)
    return dist_inside_elementwise(v.coords(), q.cen.coords(), cr, c.c);
  std::vector<double> clamped(v.dim());
  for (std::size_t j = 0; j < v.dim(); ++j)
    clamped[j] = std::min(cr.q_max[j], std::max(cr.q_min[j], v[j]));
  std::vector<double> diff(v.dim());
  gyro::mobius_sub(q.cen.coords(), clamped, c.c, diff);
  double s = 0.0;
  for (double x : diff) s += std::abs(x);
  return s;
}

namespace {

double combine_distance(double d_out, double d_in, const DistanceWeights& w, double c) {
  if (w.combine_mode == DistanceWeights::Combine::euclidean) return d_out + w.gamma * d_in;
  // The scalar Mobius addition needs operands in (-1, 1); squash through tanh.
  const double a = std::tanh(d_out);
  const double b = std::tanh(w.gamma * d_in);
  return gyro::mobius_add_1d(a, b, c);
}

}  // namespace

double point_box_distance(const BallPoint& v, const Hyperboloid& q, const DistanceWeights& w,
                          const Curvature& c) {
  const double d_out = dist_outside(v, q, c, w.reading);
  const double d_in = dist_inside(v, q, c, w.reading);
  return combine_distance(d_out, d_in, w, c.c);
}

Hyperboloid translate(const Hyperboloid& e, const Hyperboloid& r, const Curvature& c) {
  if (e.dim() != r.dim()) throw UsageError("translate: dimension mismatch");
  BallPoint cen = mobius_add(e.cen, r.cen, c);
  std::vector<double> lim(e.dim());
  for (std::size_t j = 0; j < e.dim(); ++j) {
    if (e.lim[j] >= 1.0 || r.lim[j] >= 1.0)
      throw NumericError("translate: limit coordinate outside [0,1)");
    lim[j] = gyro::mobius_add_1d(e.lim[j], r.lim[j], c.c);
  }
  return Hyperboloid(std::move(cen), std::move(lim));
}

double box_distance_kernel(std::span<const double> v, std::span<const double> q_min,
                           std::span<const double> q_max, std::span<const double> cen,
                           double c, double gamma, DistanceWeights::Combine combine) {
  double d_out = 0.0;
  double d_in = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    d_out += std::max(gyro::mobius_sub_1d(v[j], q_max[j], c), 0.0);
    d_out += std::max(gyro::mobius_sub_1d(q_min[j], v[j], c), 0.0);
    const double clamped = std::min(q_max[j], std::max(q_min[j], v[j]));
    d_in += std::abs(gyro::mobius_sub_1d(cen[j], clamped, c));
  }
  if (combine == DistanceWeights::Combine::euclidean) return d_out + gamma * d_in;
  return gyro::mobius_add_1d(std::tanh(d_out), std::tanh(gamma * d_in), c);
}

}  // namespace horo
