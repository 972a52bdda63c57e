#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "horo/common.hpp"
#include "horo/hyperboloid.hpp"

namespace horo::ad {

using NodeId = std::int32_t;

// Identifies one parameter row of a ParameterStore-like registry.
struct ParamKey {
  std::int32_t block = -1;
  std::int32_t row = 0;
};

struct BlockShape {
  std::int32_t rows = 0;
  std::int32_t row_len = 0;
};

// Dense per-parameter gradient storage. Blocks mirror the parameter layout;
// rows untouched by a backward pass stay bitwise zero, which is what realizes
// gradient gating for layers disconnected from a loss.
class GradientBuffer {
 public:
  void configure(const std::vector<BlockShape>& shapes);
  void zero();

  std::span<double> row(std::int32_t block, std::int32_t row);
  std::span<const double> row(std::int32_t block, std::int32_t row) const;
  std::span<double> block(std::int32_t b) { return blocks_[b]; }
  std::span<const double> block(std::int32_t b) const { return blocks_[b]; }
  std::size_t block_count() const { return blocks_.size(); }
  const BlockShape& shape(std::int32_t b) const { return shapes_[b]; }

  // this += other, in fixed block order (deterministic worker merges).
  void accumulate(const GradientBuffer& other);

 private:
  std::vector<BlockShape> shapes_;
  std::vector<std::vector<double>> blocks_;
};

// Append-only expression tape over f64 vectors. Forward values are computed
// eagerly at emit time; backward() runs reverse accumulation from a scalar
// root and scatters parameter adjoints into a GradientBuffer. Construction
// order fixes both evaluation and reduction order, so identical tapes yield
// bitwise-identical gradients.
class Tape {
 public:
  Tape() = default;

  void reset();
  std::size_t node_count() const { return nodes_.size(); }

  NodeId constant(std::span<const double> v);
  NodeId constant_scalar(double v);
  NodeId param(ParamKey key, std::span<const double> value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId divide(NodeId a, NodeId b);
  NodeId minimum(NodeId a, NodeId b);  // ties select the first operand
  NodeId maximum(NodeId a, NodeId b);

  NodeId negate(NodeId a);
  NodeId absval(NodeId a);
  NodeId relu(NodeId a);
  NodeId tanh_(NodeId a);
  NodeId artanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId log_sigmoid(NodeId a);
  NodeId sqrt_(NodeId a);
  NodeId exp_(NodeId a);
  NodeId acosh_(NodeId a);  // argument clamped to >= 1; flat below the clamp

  NodeId scale(NodeId a, double k);
  NodeId shift(NodeId a, double k);
  NodeId broadcast_mul(NodeId vec, NodeId scalar);
  NodeId broadcast_div(NodeId vec, NodeId scalar);

  NodeId dot(NodeId a, NodeId b);
  NodeId sum(NodeId a);
  NodeId matvec(NodeId w, NodeId x, std::int32_t rows);
  NodeId concat(NodeId a, NodeId b);

  struct BoxNodes {
    NodeId q_min = -1;
    NodeId q_max = -1;
    NodeId cen = -1;
  };

  // Fused point-to-region distance (see box_distance_kernel).
  NodeId box_dist(NodeId v, const BoxNodes& box, NodeId c, double gamma,
                  DistanceWeights::Combine combine);

  // Fused margin ranking loss over one positive and k negatives scored
  // against the minimum distance across DNF branches:
  //   -log sig(m - s_pos) - (1/k) sum_neg log sig(s_neg - m)
  // entities[0] is the positive; the rest are negatives.
  NodeId rank_loss(std::span<const BoxNodes> branches, NodeId c,
                   std::span<const NodeId> entities, double gamma, double margin,
                   DistanceWeights::Combine combine);

  std::int32_t dim(NodeId n) const { return nodes_[n].dim; }
  std::span<const double> value(NodeId n) const;
  double scalar_value(NodeId n) const { return value(n)[0]; }

  // Reverse pass from a scalar root (seed 1). Throws NumericError naming the
  // first non-finite node if the forward value is not finite.
  void backward(NodeId root, GradientBuffer& sink);

 private:
  enum class Op : std::uint8_t {
    kConst, kParam,
    kAdd, kSub, kMul, kDiv, kMin, kMax,
    kNeg, kAbs, kRelu, kTanh, kArtanh, kSigmoid, kLogSigmoid, kSqrt, kExp, kAcosh,
    kScale, kShift, kBMul, kBDiv,
    kDot, kSum, kMatVec, kConcat,
    kBoxDist, kRankLoss,
  };

  struct Node {
    Op op;
    std::uint8_t flag = 0;  // combine mode for fused ops
    std::int32_t dim = 0;
    NodeId a = -1;
    NodeId b = -1;
    std::int32_t off = 0;        // value/adjoint offset
    std::int32_t extra_off = 0;  // into extra_ (fused op argument lists)
    std::int32_t extra_len = 0;
    std::int32_t scratch = -1;   // into scratch_ (fused op caches)
    std::int32_t param = -1;     // into params_
    double aux0 = 0.0;
    double aux1 = 0.0;
  };

  NodeId emit(Node n);
  std::span<double> out(const Node& n) { return {val_.data() + n.off, static_cast<std::size_t>(n.dim)}; }
  std::span<const double> in(NodeId id) const {
    const Node& n = nodes_[id];
    return {val_.data() + n.off, static_cast<std::size_t>(n.dim)};
  }
  std::span<double> adj(NodeId id) {
    const Node& n = nodes_[id];
    return {adj_.data() + n.off, static_cast<std::size_t>(n.dim)};
  }
  void check_dims(NodeId a, NodeId b, const char* op) const;
  const char* op_name(Op op) const;

  std::vector<Node> nodes_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<std::int32_t> extra_;
  std::vector<double> scratch_;
  std::vector<ParamKey> params_;
};

}  // namespace horo::ad
