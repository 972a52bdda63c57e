#pragma once

#include "horo/tape.hpp"

namespace horo::ad {

// Gyrovector composites emitted as primitive tape nodes. The scale parameter
// c rides along as a (possibly trainable) scalar node everywhere, so the same
// builders serve both the fixed- and trainable-curvature modes.

NodeId t_mobius_add(Tape& t, NodeId x, NodeId y, NodeId c);
NodeId t_mobius_sub(Tape& t, NodeId x, NodeId y, NodeId c);
NodeId t_exp0(Tape& t, NodeId v, NodeId c);
NodeId t_log0(Tape& t, NodeId y, NodeId c);
NodeId t_exp_at(Tape& t, NodeId base, NodeId v, NodeId c);
NodeId t_log_at(Tape& t, NodeId base, NodeId y, NodeId c);
NodeId t_mobius_scalar(Tape& t, double r, NodeId x, NodeId c);
NodeId t_conformal(Tape& t, NodeId x);
NodeId t_distance(Tape& t, NodeId x, NodeId y);  // geodesic distance, c = 1 form

// Coordinate-wise 1-D gyrovector ops (limit arithmetic, corner formulas).
NodeId t_madd_ew(Tape& t, NodeId a, NodeId b, NodeId c);
NodeId t_msub_ew(Tape& t, NodeId a, NodeId b, NodeId c);
// tanh(r_j * artanh(sqrt(c) x_j)) / sqrt(c), per coordinate.
NodeId t_mscalar_ew(Tape& t, NodeId r, NodeId x, NodeId c);

struct TapeBox {
  NodeId cen = -1;
  NodeId lim = -1;
};

Tape::BoxNodes t_corners(Tape& t, const TapeBox& box, NodeId c);
TapeBox t_translate(Tape& t, const TapeBox& e, const TapeBox& r, NodeId c);

// Composite (non-fused) point-to-region distance; covers both readings and
// both combine modes. The fused Tape::box_dist covers the element-wise
// reading only and is the trained path; this one is the reference.
NodeId t_box_dist_composite(Tape& t, NodeId v, const Tape::BoxNodes& box, NodeId c,
                            const DistanceWeights& w);

}  // namespace horo::ad
