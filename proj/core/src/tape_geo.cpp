#include "horo/tape_geo.hpp"

namespace horo::ad {

namespace {

// sqrt(max(|x|^2, tiny)) -- keeps the norm strictly positive so direction
// quotients stay finite; the max routes the gradient to the constant branch
// at the singular point.
NodeId t_safe_norm(Tape& t, NodeId x) {
  NodeId n2 = t.dot(x, x);
  NodeId floor = t.constant_scalar(1e-30);
  return t.sqrt_(t.maximum(n2, floor));
}

// lambda_x^c = 2 / (1 - c |x|^2) as a scalar node.
NodeId t_lambda(Tape& t, NodeId x, NodeId c) {
  NodeId cx2 = t.mul(c, t.dot(x, x));
  return t.divide(t.constant_scalar(2.0), t.shift(t.negate(cx2), 1.0));
}

}  // namespace

NodeId t_mobius_add(Tape& t, NodeId x, NodeId y, NodeId c) {
  NodeId xy = t.dot(x, y);
  NodeId x2 = t.dot(x, x);
  NodeId y2 = t.dot(y, y);
  NodeId cxy2 = t.scale(t.mul(c, xy), 2.0);
  NodeId a = t.shift(t.add(cxy2, t.mul(c, y2)), 1.0);
  NodeId b = t.shift(t.negate(t.mul(c, x2)), 1.0);
  NodeId den = t.shift(t.add(cxy2, t.mul(t.mul(c, x2), t.mul(c, y2))), 1.0);
  return t.broadcast_div(t.add(t.broadcast_mul(x, a), t.broadcast_mul(y, b)), den);
}

NodeId t_mobius_sub(Tape& t, NodeId x, NodeId y, NodeId c) {
  return t_mobius_add(t, x, t.negate(y), c);
}

NodeId t_exp0(Tape& t, NodeId v, NodeId c) {
  NodeId n = t_safe_norm(t, v);
  NodeId z = t.mul(t.sqrt_(c), n);
  NodeId coef = t.divide(t.tanh_(z), z);
  return t.broadcast_mul(v, coef);
}

NodeId t_log0(Tape& t, NodeId y, NodeId c) {
  NodeId n = t_safe_norm(t, y);
  NodeId z = t.mul(t.sqrt_(c), n);
  NodeId coef = t.divide(t.artanh(z), z);
  return t.broadcast_mul(y, coef);
}

NodeId t_exp_at(Tape& t, NodeId base, NodeId v, NodeId c) {
  NodeId sc = t.sqrt_(c);
  NodeId n = t_safe_norm(t, v);
  NodeId lam = t_lambda(t, base, c);
  NodeId arg = t.scale(t.mul(t.mul(sc, lam), n), 0.5);
  NodeId coef = t.divide(t.tanh_(arg), t.mul(sc, n));
  return t_mobius_add(t, base, t.broadcast_mul(v, coef), c);
}

NodeId t_log_at(Tape& t, NodeId base, NodeId y, NodeId c) {
  NodeId u = t_mobius_add(t, t.negate(base), y, c);
  NodeId sc = t.sqrt_(c);
  NodeId n = t_safe_norm(t, u);
  NodeId at = t.artanh(t.mul(sc, n));
  NodeId lam = t_lambda(t, base, c);
  NodeId coef = t.divide(t.scale(at, 2.0), t.mul(t.mul(sc, lam), n));
  return t.broadcast_mul(u, coef);
}

NodeId t_mobius_scalar(Tape& t, double r, NodeId x, NodeId c) {
  NodeId n = t_safe_norm(t, x);
  NodeId z = t.mul(t.sqrt_(c), n);
  NodeId coef = t.divide(t.tanh_(t.scale(t.artanh(z), r)), z);
  return t.broadcast_mul(x, coef);
}

NodeId t_conformal(Tape& t, NodeId x) {
  NodeId n2 = t.dot(x, x);
  return t.divide(t.constant_scalar(2.0), t.shift(t.negate(n2), 1.0));
}

NodeId t_distance(Tape& t, NodeId x, NodeId y) {
  NodeId diff = t.sub(x, y);
  NodeId d2 = t.dot(diff, diff);
  NodeId fx = t.shift(t.negate(t.dot(x, x)), 1.0);
  NodeId fy = t.shift(t.negate(t.dot(y, y)), 1.0);
  NodeId arg = t.shift(t.divide(t.scale(d2, 2.0), t.mul(fx, fy)), 1.0);
  return t.acosh_(arg);
}

NodeId t_madd_ew(Tape& t, NodeId a, NodeId b, NodeId c) {
  NodeId den = t.shift(t.broadcast_mul(t.mul(a, b), c), 1.0);
  return t.divide(t.add(a, b), den);
}

NodeId t_msub_ew(Tape& t, NodeId a, NodeId b, NodeId c) {
  NodeId den = t.shift(t.negate(t.broadcast_mul(t.mul(a, b), c)), 1.0);
  return t.divide(t.sub(a, b), den);
}

NodeId t_mscalar_ew(Tape& t, NodeId r, NodeId x, NodeId c) {
  NodeId sc = t.sqrt_(c);
  NodeId at = t.artanh(t.broadcast_mul(x, sc));
  return t.broadcast_div(t.tanh_(t.mul(r, at)), sc);
}

Tape::BoxNodes t_corners(Tape& t, const TapeBox& box, NodeId c) {
  Tape::BoxNodes out;
  out.q_min = t_msub_ew(t, box.cen, box.lim, c);
  out.q_max = t_madd_ew(t, box.cen, box.lim, c);
  out.cen = box.cen;
  return out;
}

TapeBox t_translate(Tape& t, const TapeBox& e, const TapeBox& r, NodeId c) {
  TapeBox out;
  out.cen = t_mobius_add(t, e.cen, r.cen, c);
  out.lim = t_madd_ew(t, e.lim, r.lim, c);
  return out;
}

NodeId t_box_dist_composite(Tape& t, NodeId v, const Tape::BoxNodes& box, NodeId c,
                            const DistanceWeights& w) {
  NodeId d_out;
  NodeId d_in;
  // The clamp order mirrors the kernel: min(q_max, max(q_min, v)).
  NodeId clamped = t.minimum(box.q_max, t.maximum(box.q_min, v));
  if (w.reading == DistanceWeights::Reading::elementwise) {
    NodeId over = t.relu(t_msub_ew(t, v, box.q_max, c));
    NodeId under = t.relu(t_msub_ew(t, box.q_min, v, c));
    d_out = t.sum(t.add(over, under));
    d_in = t.sum(t.absval(t_msub_ew(t, box.cen, clamped, c)));
  } else {
    d_out = t.add(t_distance(t, v, box.q_max), t_distance(t, box.q_min, v));
    d_in = t.sum(t.absval(t_mobius_sub(t, box.cen, clamped, c)));
  }
  if (w.combine_mode == DistanceWeights::Combine::euclidean)
    return t.add(d_out, t.scale(d_in, w.gamma));
  NodeId a = t.tanh_(d_out);
  NodeId b = t.tanh_(t.scale(d_in, w.gamma));
  NodeId den = t.shift(t.mul(t.mul(a, b), c), 1.0);
  return t.divide(t.add(a, b), den);
}

}  // namespace horo::ad
