#pragma once

#include <span>
#include <vector>

#include "horo/gyro.hpp"

namespace horo {

// Center/limit region of the Poincare ball: a ball-point center plus a
// nonnegative per-dimension extent. Corners are taken coordinate-wise with
// 1-D gyrovector arithmetic, so every limit coordinate must stay below 1.
struct Hyperboloid {
  BallPoint cen;
  std::vector<double> lim;

  Hyperboloid() = default;
  Hyperboloid(BallPoint center, std::vector<double> limit);

  std::size_t dim() const { return lim.size(); }
};

// How point-to-region distances are combined and read.
struct DistanceWeights {
  double gamma = 0.5;
  enum class Combine { mobius, euclidean };
  Combine combine_mode = Combine::euclidean;
  // elementwise: per-coordinate 1-D gyro differences inside d_out/d_in
  //              (signed, so the outer Max and L1 norm are meaningful).
  // literal:     scalar geodesic distances to the corner points, as the
  //              distance formula reads if taken at face value.
  enum class Reading { elementwise, literal };
  Reading reading = Reading::elementwise;
};

struct Corners {
  std::vector<double> q_min;
  std::vector<double> q_max;
};

// q_min = cen (-)_c lim, q_max = cen (+)_c lim, coordinate-wise 1-D.
// Throws NumericError when any |lim_j| >= 1.
Corners corners(const Hyperboloid& q, const Curvature& c);

// L1 of max(v (-)_c q_max, 0) + max(q_min (-)_c v, 0), coordinate-wise.
// Zero exactly when q_min <= v <= q_max holds in every coordinate.
double dist_outside(const BallPoint& v, const Hyperboloid& q, const Curvature& c,
                    DistanceWeights::Reading reading = DistanceWeights::Reading::elementwise);

// L1 of cen(q) (-)_c min(q_max, max(q_min, v)), coordinate-wise.
double dist_inside(const BallPoint& v, const Hyperboloid& q, const Curvature& c,
                   DistanceWeights::Reading reading = DistanceWeights::Reading::elementwise);

// d_out combined with gamma * d_in, either Euclidean or through a 1-D Mobius
// addition of the tanh-squashed operands.
double point_box_distance(const BallPoint& v, const Hyperboloid& q, const DistanceWeights& w,
                          const Curvature& c);

// Relational translation: centers via vector Mobius addition, limits via
// coordinate-wise 1-D Mobius addition (so the result's extent dominates both
// inputs' extents).
Hyperboloid translate(const Hyperboloid& e, const Hyperboloid& r, const Curvature& c);

// Span-level scoring kernel shared by the plain scorer and the tape op, so
// both paths produce bit-identical forward values.
double box_distance_kernel(std::span<const double> v, std::span<const double> q_min,
                           std::span<const double> q_max, std::span<const double> cen,
                           double c, double gamma, DistanceWeights::Combine combine);

}  // namespace horo
