#include "horo/tape.hpp"

#include <algorithm>
#include <cmath>

namespace horo::ad {

namespace {

using horo::stable_log_sigmoid;
using horo::stable_sigmoid;

// Partials of the 1-D Mobius difference (a - b) / (1 - c a b).
struct MsubGrad {
  double da, db, dc;
};

MsubGrad msub_grad(double a, double b, double c) {
  const double den = 1.0 - c * a * b;
  const double inv2 = 1.0 / (den * den);
  return {(1.0 - c * b * b) * inv2, -(1.0 - c * a * a) * inv2, (a - b) * a * b * inv2};
}

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Shared reverse rule for the fused point-to-region distance. Recomputes the
// forward per-coordinate state and accumulates into the argument adjoints.
void box_dist_backward(double g, std::span<const double> v, std::span<const double> q_min,
                       std::span<const double> q_max, std::span<const double> cen, double c,
                       double gamma, DistanceWeights::Combine combine, std::span<double> gv,
                       std::span<double> gq_min, std::span<double> gq_max,
                       std::span<double> gcen, double& gc) {
  double w_out = g;
  double w_in = g * gamma;
  if (combine == DistanceWeights::Combine::mobius) {
    double d_out = 0.0, d_in = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      d_out += std::max(gyro::mobius_sub_1d(v[j], q_max[j], c), 0.0);
      d_out += std::max(gyro::mobius_sub_1d(q_min[j], v[j], c), 0.0);
      const double cl = std::min(q_max[j], std::max(q_min[j], v[j]));
      d_in += std::abs(gyro::mobius_sub_1d(cen[j], cl, c));
    }
    const double t1 = std::tanh(d_out);
    const double t2 = std::tanh(gamma * d_in);
    const double den = 1.0 + c * t1 * t2;
    const double inv2 = 1.0 / (den * den);
    const double ds_dt1 = (1.0 - c * t2 * t2) * inv2;
    const double ds_dt2 = (1.0 - c * t1 * t1) * inv2;
    gc += g * (-(t1 + t2) * t1 * t2 * inv2);
    w_out = g * ds_dt1 * (1.0 - t1 * t1);
    w_in = g * ds_dt2 * gamma * (1.0 - t2 * t2);
  }
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double t1 = gyro::mobius_sub_1d(v[j], q_max[j], c);
    if (t1 > 0.0) {
      const MsubGrad m = msub_grad(v[j], q_max[j], c);
      gv[j] += w_out * m.da;
      gq_max[j] += w_out * m.db;
      gc += w_out * m.dc;
    }
    const double t2 = gyro::mobius_sub_1d(q_min[j], v[j], c);
    if (t2 > 0.0) {
      const MsubGrad m = msub_grad(q_min[j], v[j], c);
      gq_min[j] += w_out * m.da;
      gv[j] += w_out * m.db;
      gc += w_out * m.dc;
    }
    const double inner = std::max(q_min[j], v[j]);
    const double cl = std::min(q_max[j], inner);
    const double e = gyro::mobius_sub_1d(cen[j], cl, c);
    const double sg = sign0(e);
    if (sg != 0.0) {
      const MsubGrad m = msub_grad(cen[j], cl, c);
      gcen[j] += w_in * sg * m.da;
      gc += w_in * sg * m.dc;
      const double gcl = w_in * sg * m.db;
      // Clamp routing, ties to the first operand of each min/max.
      if (q_max[j] <= inner) {
        gq_max[j] += gcl;
      } else if (q_min[j] >= v[j]) {
        gq_min[j] += gcl;
      } else {
        gv[j] += gcl;
      }
    }
  }
}

}  // namespace

void GradientBuffer::configure(const std::vector<BlockShape>& shapes) {
  shapes_ = shapes;
  blocks_.resize(shapes.size());
  for (std::size_t b = 0; b < shapes.size(); ++b)
    blocks_[b].assign(static_cast<std::size_t>(shapes[b].rows) * shapes[b].row_len, 0.0);
}

void GradientBuffer::zero() {
  for (auto& b : blocks_) std::fill(b.begin(), b.end(), 0.0);
}

std::span<double> GradientBuffer::row(std::int32_t block, std::int32_t row) {
  const auto len = static_cast<std::size_t>(shapes_[block].row_len);
  return {blocks_[block].data() + row * len, len};
}

std::span<const double> GradientBuffer::row(std::int32_t block, std::int32_t row) const {
  const auto len = static_cast<std::size_t>(shapes_[block].row_len);
  return {blocks_[block].data() + row * len, len};
}

void GradientBuffer::accumulate(const GradientBuffer& other) {
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    for (std::size_t i = 0; i < blocks_[b].size(); ++i) blocks_[b][i] += other.blocks_[b][i];
}

void Tape::reset() {
  nodes_.clear();
  val_.clear();
  extra_.clear();
  scratch_.clear();
  params_.clear();
}

NodeId Tape::emit(Node n) {
  n.off = static_cast<std::int32_t>(val_.size());
  val_.resize(val_.size() + n.dim);
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_dims(NodeId a, NodeId b, const char* op) const {
  if (nodes_[a].dim != nodes_[b].dim)
    throw UsageError(std::string(op) + ": operand dimension mismatch");
}

std::span<const double> Tape::value(NodeId n) const { return in(n); }

NodeId Tape::constant(std::span<const double> v) {
  Node n{};
  n.op = Op::kConst;
  n.dim = static_cast<std::int32_t>(v.size());
  NodeId id = emit(n);
  std::copy(v.begin(), v.end(), out(nodes_[id]).begin());
  return id;
}

NodeId Tape::constant_scalar(double v) { return constant(std::span<const double>(&v, 1)); }

NodeId Tape::param(ParamKey key, std::span<const double> value) {
  Node n{};
  n.op = Op::kParam;
  n.dim = static_cast<std::int32_t>(value.size());
  n.param = static_cast<std::int32_t>(params_.size());
  params_.push_back(key);
  NodeId id = emit(n);
  std::copy(value.begin(), value.end(), out(nodes_[id]).begin());
  return id;
}

#define HORO_BINARY(NAME, OPK, EXPR)                                  \
  NodeId Tape::NAME(NodeId a, NodeId b) {                             \
    check_dims(a, b, #NAME);                                          \
    Node n{};                                                         \
    n.op = Op::OPK;                                                   \
    n.dim = nodes_[a].dim;                                            \
    n.a = a;                                                          \
    n.b = b;                                                          \
    NodeId id = emit(n);                                              \
    auto av = in(a);                                                  \
    auto bv = in(b);                                                  \
    auto ov = out(nodes_[id]);                                        \
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = (EXPR);       \
    return id;                                                        \
  }

HORO_BINARY(add, kAdd, av[i] + bv[i])
HORO_BINARY(sub, kSub, av[i] - bv[i])
HORO_BINARY(mul, kMul, av[i] * bv[i])
HORO_BINARY(divide, kDiv, av[i] / bv[i])
HORO_BINARY(minimum, kMin, bv[i] < av[i] ? bv[i] : av[i])
HORO_BINARY(maximum, kMax, av[i] < bv[i] ? bv[i] : av[i])
#undef HORO_BINARY

#define HORO_UNARY(NAME, OPK, EXPR)                                   \
  NodeId Tape::NAME(NodeId a) {                                       \
    Node n{};                                                         \
    n.op = Op::OPK;                                                   \
    n.dim = nodes_[a].dim;                                            \
    n.a = a;                                                          \
    NodeId id = emit(n);                                              \
    auto av = in(a);                                                  \
    auto ov = out(nodes_[id]);                                        \
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = (EXPR);       \
    return id;                                                        \
  }

HORO_UNARY(negate, kNeg, -av[i])
HORO_UNARY(absval, kAbs, std::abs(av[i]))
HORO_UNARY(relu, kRelu, av[i] > 0.0 ? av[i] : 0.0)
HORO_UNARY(tanh_, kTanh, std::tanh(av[i]))
HORO_UNARY(artanh, kArtanh, atanh_clamped(av[i]))
HORO_UNARY(sigmoid, kSigmoid, stable_sigmoid(av[i]))
HORO_UNARY(log_sigmoid, kLogSigmoid, stable_log_sigmoid(av[i]))
HORO_UNARY(sqrt_, kSqrt, std::sqrt(av[i]))
HORO_UNARY(exp_, kExp, std::exp(av[i]))
HORO_UNARY(acosh_, kAcosh, std::acosh(std::max(av[i], 1.0)))
#undef HORO_UNARY

NodeId Tape::scale(NodeId a, double k) {
  Node n{};
  n.op = Op::kScale;
  n.dim = nodes_[a].dim;
  n.a = a;
  n.aux0 = k;
  NodeId id = emit(n);
  auto av = in(a);
  auto ov = out(nodes_[id]);
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = k * av[i];
  return id;
}

NodeId Tape::shift(NodeId a, double k) {
  Node n{};
  n.op = Op::kShift;
  n.dim = nodes_[a].dim;
  n.a = a;
  n.aux0 = k;
  NodeId id = emit(n);
  auto av = in(a);
  auto ov = out(nodes_[id]);
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + k;
  return id;
}

NodeId Tape::broadcast_mul(NodeId vec, NodeId scalar) {
  if (nodes_[scalar].dim != 1) throw UsageError("broadcast_mul: scalar operand must have dim 1");
  Node n{};
  n.op = Op::kBMul;
  n.dim = nodes_[vec].dim;
  n.a = vec;
  n.b = scalar;
  NodeId id = emit(n);
  auto av = in(vec);
  const double s = in(scalar)[0];
  auto ov = out(nodes_[id]);
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * s;
  return id;
}

NodeId Tape::broadcast_div(NodeId vec, NodeId scalar) {
  if (nodes_[scalar].dim != 1) throw UsageError("broadcast_div: scalar operand must have dim 1");
  Node n{};
  n.op = Op::kBDiv;
  n.dim = nodes_[vec].dim;
  n.a = vec;
  n.b = scalar;
  NodeId id = emit(n);
  auto av = in(vec);
  const double s = in(scalar)[0];
  auto ov = out(nodes_[id]);
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] / s;
  return id;
}

NodeId Tape::dot(NodeId a, NodeId b) {
  check_dims(a, b, "dot");
  Node n{};
  n.op = Op::kDot;
  n.dim = 1;
  n.a = a;
  n.b = b;
  NodeId id = emit(n);
  out(nodes_[id])[0] = horo::dot(in(a), in(b));
  return id;
}

NodeId Tape::sum(NodeId a) {
  Node n{};
  n.op = Op::kSum;
  n.dim = 1;
  n.a = a;
  NodeId id = emit(n);
  double s = 0.0;
  for (double x : in(a)) s += x;
  out(nodes_[id])[0] = s;
  return id;
}

NodeId Tape::matvec(NodeId w, NodeId x, std::int32_t rows) {
  const std::int32_t cols = nodes_[x].dim;
  if (nodes_[w].dim != rows * cols) throw UsageError("matvec: weight/vector shape mismatch");
  Node n{};
  n.op = Op::kMatVec;
  n.dim = rows;
  n.a = w;
  n.b = x;
  NodeId id = emit(n);
  auto wv = in(w);
  auto xv = in(x);
  auto ov = out(nodes_[id]);
  for (std::int32_t i = 0; i < rows; ++i) {
    double s = 0.0;
    const double* row = wv.data() + static_cast<std::size_t>(i) * cols;
    for (std::int32_t j = 0; j < cols; ++j) s += row[j] * xv[j];
    ov[i] = s;
  }
  return id;
}

NodeId Tape::concat(NodeId a, NodeId b) {
  Node n{};
  n.op = Op::kConcat;
  n.dim = nodes_[a].dim + nodes_[b].dim;
  n.a = a;
  n.b = b;
  NodeId id = emit(n);
  auto av = in(a);
  auto bv = in(b);
  auto ov = out(nodes_[id]);
  std::copy(av.begin(), av.end(), ov.begin());
  std::copy(bv.begin(), bv.end(), ov.begin() + av.size());
  return id;
}

NodeId Tape::box_dist(NodeId v, const BoxNodes& box, NodeId c, double gamma,
                      DistanceWeights::Combine combine) {
  check_dims(v, box.q_min, "box_dist");
  check_dims(v, box.q_max, "box_dist");
  check_dims(v, box.cen, "box_dist");
  Node n{};
  n.op = Op::kBoxDist;
  n.flag = combine == DistanceWeights::Combine::mobius ? 1 : 0;
  n.dim = 1;
  n.a = v;
  n.aux0 = gamma;
  n.extra_off = static_cast<std::int32_t>(extra_.size());
  n.extra_len = 4;
  extra_.push_back(box.q_min);
  extra_.push_back(box.q_max);
  extra_.push_back(box.cen);
  extra_.push_back(c);
  NodeId id = emit(n);
  out(nodes_[id])[0] = box_distance_kernel(in(v), in(box.q_min), in(box.q_max), in(box.cen),
                                           in(c)[0], gamma, combine);
  return id;
}

NodeId Tape::rank_loss(std::span<const BoxNodes> branches, NodeId c,
                       std::span<const NodeId> entities, double gamma, double margin,
                       DistanceWeights::Combine combine) {
  if (branches.empty() || entities.empty()) throw UsageError("rank_loss: empty inputs");
  Node n{};
  n.op = Op::kRankLoss;
  n.flag = combine == DistanceWeights::Combine::mobius ? 1 : 0;
  n.dim = 1;
  n.aux0 = gamma;
  n.aux1 = margin;
  n.extra_off = static_cast<std::int32_t>(extra_.size());
  extra_.push_back(c);
  extra_.push_back(static_cast<std::int32_t>(branches.size()));
  for (const BoxNodes& b : branches) {
    extra_.push_back(b.q_min);
    extra_.push_back(b.q_max);
    extra_.push_back(b.cen);
  }
  extra_.push_back(static_cast<std::int32_t>(entities.size()));
  for (NodeId e : entities) extra_.push_back(e);
  n.extra_len = static_cast<std::int32_t>(extra_.size()) - n.extra_off;
  n.scratch = static_cast<std::int32_t>(scratch_.size());
  scratch_.resize(scratch_.size() + 2 * entities.size());

  NodeId id = emit(n);
  const Node& node = nodes_[id];
  const std::int32_t* ex = extra_.data() + node.extra_off;
  const double cv = in(ex[0])[0];
  const std::int32_t nb = ex[1];
  const std::int32_t ne = ex[2 + 3 * nb];
  const std::int32_t* ents = ex + 3 + 3 * nb;

  double loss = 0.0;
  for (std::int32_t i = 0; i < ne; ++i) {
    double best = 0.0;
    std::int32_t best_b = 0;
    for (std::int32_t b = 0; b < nb; ++b) {
      const std::int32_t* box = ex + 2 + 3 * b;
      const double d = box_distance_kernel(in(ents[i]), in(box[0]), in(box[1]), in(box[2]), cv,
                                           gamma, combine);
      if (b == 0 || d < best) {
        best = d;
        best_b = b;
      }
    }
    scratch_[node.scratch + 2 * i] = best;
    scratch_[node.scratch + 2 * i + 1] = static_cast<double>(best_b);
    if (i == 0) {
      loss += -stable_log_sigmoid(margin - best);
    } else {
      loss += -stable_log_sigmoid(best - margin) / static_cast<double>(ne - 1);
    }
  }
  out(nodes_[id])[0] = loss;
  return id;
}

const char* Tape::op_name(Op op) const {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMin: return "min";
    case Op::kMax: return "max";
    case Op::kNeg: return "neg";
    case Op::kAbs: return "abs";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kArtanh: return "artanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLogSigmoid: return "log_sigmoid";
    case Op::kSqrt: return "sqrt";
    case Op::kExp: return "exp";
    case Op::kAcosh: return "acosh";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kBMul: return "broadcast_mul";
    case Op::kBDiv: return "broadcast_div";
    case Op::kDot: return "dot";
    case Op::kSum: return "sum";
    case Op::kMatVec: return "matvec";
    case Op::kConcat: return "concat";
    case Op::kBoxDist: return "box_dist";
    case Op::kRankLoss: return "rank_loss";
  }
  return "?";
}

void Tape::backward(NodeId root, GradientBuffer& sink) {
  if (nodes_[root].dim != 1) throw UsageError("backward: root must be scalar");
  if (!std::isfinite(in(root)[0])) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!all_finite(in(static_cast<NodeId>(i))))
        throw NumericError("non-finite value at tape node #" + std::to_string(i) + " (" +
                           op_name(nodes_[i].op) + ")");
    }
    throw NumericError("non-finite loss value");
  }

  if (adj_.size() < val_.size()) adj_.resize(val_.size());
  std::fill(adj_.begin(), adj_.begin() + static_cast<std::ptrdiff_t>(val_.size()), 0.0);
  adj(root)[0] = 1.0;

  // Nodes emitted after the root cannot influence it; start the sweep there.
  for (std::int32_t idx = root; idx >= 0; --idx) {
    const Node& n = nodes_[idx];
    auto g = adj(idx);
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam: {
        const ParamKey key = params_[n.param];
        auto dst = sink.row(key.block, key.row);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        break;
      }
      case Op::kAdd: {
        auto ga = adj(n.a), gb = adj(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        auto ga = adj(n.a), gb = adj(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        auto ga = adj(n.a), gb = adj(n.b);
        auto av = in(n.a), bv = in(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * bv[i];
          gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::kDiv: {
        auto ga = adj(n.a), gb = adj(n.b);
        auto bv = in(n.b), ov = in(idx);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] / bv[i];
          gb[i] -= g[i] * ov[i] / bv[i];
        }
        break;
      }
      case Op::kMin: {
        auto ga = adj(n.a), gb = adj(n.b);
        auto av = in(n.a), bv = in(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (bv[i] < av[i])
            gb[i] += g[i];
          else
            ga[i] += g[i];
        }
        break;
      }
      case Op::kMax: {
        auto ga = adj(n.a), gb = adj(n.b);
        auto av = in(n.a), bv = in(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (av[i] < bv[i])
            gb[i] += g[i];
          else
            ga[i] += g[i];
        }
        break;
      }
      case Op::kNeg: {
        auto ga = adj(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::kAbs: {
        auto ga = adj(n.a);
        auto av = in(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sign0(av[i]);
        break;
      }
      case Op::kRelu: {
        auto ga = adj(n.a);
        auto av = in(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::kTanh: {
        auto ga = adj(n.a);
        auto ov = in(idx);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - ov[i] * ov[i]);
        break;
      }
      case Op::kArtanh: {
        auto ga = adj(n.a);
        auto av = in(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          constexpr double lim = 1.0 - 1e-12;
          const double x = std::clamp(av[i], -lim, lim);
          ga[i] += g[i] / (1.0 - x * x);
        }
        break;
      }
      case Op::kSigmoid: {
        auto ga = adj(n.a);
        auto ov = in(idx);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i] * (1.0 - ov[i]);
        break;
      }
      case Op::kLogSigmoid: {
        auto ga = adj(n.a);
        auto av = in(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * stable_sigmoid(-av[i]);
        break;
      }
      case Op::kSqrt: {
        auto ga = adj(n.a);
        auto ov = in(idx);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (ov[i] > 0.0) ga[i] += g[i] * 0.5 / ov[i];
        break;
      }
      case Op::kExp: {
        auto ga = adj(n.a);
        auto ov = in(idx);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i];
        break;
      }
      case Op::kAcosh: {
        auto ga = adj(n.a);
        auto av = in(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av[i] > 1.0) ga[i] += g[i] / std::sqrt(av[i] * av[i] - 1.0);
        break;
      }
      case Op::kScale: {
        auto ga = adj(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux0;
        break;
      }
      case Op::kShift: {
        auto ga = adj(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kBMul: {
        auto ga = adj(n.a);
        auto gs = adj(n.b);
        auto av = in(n.a);
        const double s = in(n.b)[0];
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * s;
          acc += g[i] * av[i];
        }
        gs[0] += acc;
        break;
      }
      case Op::kBDiv: {
        auto ga = adj(n.a);
        auto gs = adj(n.b);
        auto ov = in(idx);
        const double s = in(n.b)[0];
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] / s;
          acc += g[i] * ov[i];
        }
        gs[0] -= acc / s;
        break;
      }
      case Op::kDot: {
        auto ga = adj(n.a), gb = adj(n.b);
        auto av = in(n.a), bv = in(n.b);
        const double gs = g[0];
        for (std::size_t i = 0; i < av.size(); ++i) {
          ga[i] += gs * bv[i];
          gb[i] += gs * av[i];
        }
        break;
      }
      case Op::kSum: {
        auto ga = adj(n.a);
        const double gs = g[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gs;
        break;
      }
      case Op::kMatVec: {
        auto gw = adj(n.a);
        auto gx = adj(n.b);
        auto wv = in(n.a);
        auto xv = in(n.b);
        const std::int32_t rows = n.dim;
        const std::int32_t cols = nodes_[n.b].dim;
        for (std::int32_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const std::size_t base = static_cast<std::size_t>(i) * cols;
          for (std::int32_t j = 0; j < cols; ++j) {
            gw[base + j] += gi * xv[j];
            gx[j] += gi * wv[base + j];
          }
        }
        break;
      }
      case Op::kConcat: {
        auto ga = adj(n.a), gb = adj(n.b);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[ga.size() + i];
        break;
      }
      case Op::kBoxDist: {
        const std::int32_t* ex = extra_.data() + n.extra_off;
        const NodeId q_min = ex[0], q_max = ex[1], cen = ex[2], cn = ex[3];
        double gc = 0.0;
        box_dist_backward(g[0], in(n.a), in(q_min), in(q_max), in(cen), in(cn)[0], n.aux0,
                          n.flag ? DistanceWeights::Combine::mobius
                                 : DistanceWeights::Combine::euclidean,
                          adj(n.a), adj(q_min), adj(q_max), adj(cen), gc);
        adj(cn)[0] += gc;
        break;
      }
      case Op::kRankLoss: {
        const std::int32_t* ex = extra_.data() + n.extra_off;
        const NodeId cn = ex[0];
        const std::int32_t nb = ex[1];
        const std::int32_t ne = ex[2 + 3 * nb];
        const std::int32_t* ents = ex + 3 + 3 * nb;
        const double cv = in(cn)[0];
        const double margin = n.aux1;
        const auto combine =
            n.flag ? DistanceWeights::Combine::mobius : DistanceWeights::Combine::euclidean;
        double gc = 0.0;
        for (std::int32_t i = 0; i < ne; ++i) {
          const double s = scratch_[n.scratch + 2 * i];
          const auto best_b = static_cast<std::int32_t>(scratch_[n.scratch + 2 * i + 1]);
          double gs;
          if (i == 0) {
            gs = g[0] * stable_sigmoid(s - margin);
          } else {
            gs = -g[0] * stable_sigmoid(margin - s) / static_cast<double>(ne - 1);
          }
          if (gs == 0.0) continue;
          const std::int32_t* box = ex + 2 + 3 * best_b;
          box_dist_backward(gs, in(ents[i]), in(box[0]), in(box[1]), in(box[2]), cv, n.aux0,
                            combine, adj(ents[i]), adj(box[0]), adj(box[1]), adj(box[2]), gc);
        }
        adj(cn)[0] += gc;
        break;
      }
    }
  }
}

}  // namespace horo::ad
