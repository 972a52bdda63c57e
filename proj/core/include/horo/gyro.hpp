#pragma once

#include <span>
#include <vector>

#include "horo/common.hpp"

namespace horo {

// Ball scale parameter of the gyrovector formulas. The metric itself has
// curvature -1; c scales the ball radius and is 1 by default. It may be
// marked trainable (an ablation mode); the invariant c > 0 always holds.
struct Curvature {
  double c = 1.0;
  bool trainable = false;
};

// A point of the open unit ball: finite coordinates, Euclidean norm < 1.
// Construction goes through project() which rescales anything at or beyond
// the 1 - kBallEps shell back onto it.
class BallPoint {
 public:
  BallPoint() = default;
  static BallPoint project(std::vector<double> raw);

  std::span<const double> coords() const { return v_; }
  std::size_t dim() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& vec() const { return v_; }

  friend bool operator==(const BallPoint& a, const BallPoint& b) { return a.v_ == b.v_; }

 private:
  explicit BallPoint(std::vector<double> v) : v_(std::move(v)) {}
  std::vector<double> v_;
};

// A tangent vector: finite coordinates, no norm bound.
class TangentVector {
 public:
  TangentVector() = default;
  explicit TangentVector(std::vector<double> v);

  std::span<const double> coords() const { return v_; }
  std::size_t dim() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& vec() const { return v_; }

 private:
  std::vector<double> v_;
};

namespace gyro {

// --- span kernels (no validation; used by hot paths) -----------------------

// out = x (+)_c y, the Mobius addition quotient, then shell projection.
void mobius_add(std::span<const double> x, std::span<const double> y, double c,
                std::span<double> out);

// out = x (+)_c (-y)
void mobius_sub(std::span<const double> x, std::span<const double> y, double c,
                std::span<double> out);

// out = exp_base^c(v); returns base exactly when |v| < kTinyNorm.
void exp_map(std::span<const double> base, std::span<const double> v, double c,
             std::span<double> out);

// out = log_base^c(y); zero tangent when y == base.
void log_map(std::span<const double> base, std::span<const double> y, double c,
             std::span<double> out);

// out = r (.)_c x = exp_0(r log_0(x)); closed form tanh(r artanh(sqrt(c)|x|)).
void mobius_scalar(double r, std::span<const double> x, double c, std::span<double> out);

// lambda_x = 2 / (1 - |x|^2), the conformal factor at c = 1.
double conformal_factor(std::span<const double> x);

// Geodesic distance cosh^-1(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2))), with the
// argument clamped to >= 1 against rounding.
double distance(std::span<const double> x, std::span<const double> y);

// Rescales onto the 1 - kBallEps shell when at or beyond it.
void project_in_place(std::span<double> x);

// --- 1-D gyrovector helpers (coordinates of limit vectors, scalar mixes) ---

inline double mobius_add_1d(double a, double b, double c) {
  return (a + b) / (1.0 + c * a * b);
}

inline double mobius_sub_1d(double a, double b, double c) {
  return (a - b) / (1.0 - c * a * b);
}

inline double mobius_scalar_1d(double r, double x, double c) {
  if (x == 0.0 || r == 0.0) return 0.0;
  const double sc = std::sqrt(c);
  return std::tanh(r * atanh_clamped(sc * x)) / sc;
}

}  // namespace gyro

// --- typed API --------------------------------------------------------------

BallPoint mobius_add(const BallPoint& x, const BallPoint& y, const Curvature& c);
BallPoint mobius_sub(const BallPoint& x, const BallPoint& y, const Curvature& c);
BallPoint exp_map(const BallPoint& base, const TangentVector& v, const Curvature& c);
TangentVector log_map(const BallPoint& base, const BallPoint& y, const Curvature& c);
BallPoint mobius_scalar(double r, const BallPoint& x, const Curvature& c);
double conformal_factor(const BallPoint& x);
double hyp_distance(const BallPoint& x, const BallPoint& y);
BallPoint safe_project(std::vector<double> raw);
BallPoint negate(const BallPoint& x);

}  // namespace horo
