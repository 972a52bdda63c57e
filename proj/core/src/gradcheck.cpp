#include "horo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "horo/tape_geo.hpp"

namespace horo {

double GradientReport::max_rel_err() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_err);
  return worst;
}

namespace {

double eval_loss(const LossBuilder& builder, const ParameterStore& params) {
  ad::Tape tape;
  return tape.scalar_value(builder(tape, params));
}

}  // namespace

GradCheckResult finite_diff_check(const LossBuilder& builder, ParameterStore& params,
                                  double step, std::int32_t max_coords_per_block,
                                  std::uint64_t coord_seed) {
  // Analytic pass.
  ad::GradientBuffer grads;
  grads.configure(params.shapes());
  {
    ad::Tape tape;
    const ad::NodeId root = builder(tape, params);
    tape.backward(root, grads);
  }

  GradCheckResult result;
  for (std::int32_t b = 0; b < block::kCount; ++b) {
    const auto shape = params.shape(b);
    const std::int64_t total = static_cast<std::int64_t>(shape.rows) * shape.row_len;
    if (total == 0) continue;
    if (b == block::kCurvature && !params.curvature_trainable()) continue;

    // Optionally probe a seeded coordinate subset (kink-free ops are cheap
    // enough to sweep fully; perceptron-bearing losses are not).
    std::vector<std::int64_t> coords;
    if (max_coords_per_block > 0 && total > max_coords_per_block) {
      Rng rng(derive_seed(coord_seed, "fd_coords", static_cast<std::uint64_t>(b)));
      for (std::int32_t i = 0; i < max_coords_per_block; ++i)
        coords.push_back(static_cast<std::int64_t>(rng.next_below(total)));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    } else {
      coords.resize(total);
      for (std::int64_t i = 0; i < total; ++i) coords[i] = i;
    }

    const bool is_ball = params.kind(b) == ManifoldKind::ball;
    for (std::int64_t flat : coords) {
      const auto r = static_cast<std::int32_t>(flat / shape.row_len);
      const auto i = static_cast<std::int32_t>(flat % shape.row_len);
      auto row = params.row(b, r);
      const double saved = row[i];

      double h = step;
      double numeric = 0.0;
      double f_ref_plus = 0.0;
      double f_ref_minus = 0.0;
      for (int attempt = 0;; ++attempt) {
        row[i] = saved + h;
        const bool plus_ok = !is_ball || norm(row) < 1.0 - kBallEps;
        const double f_plus = plus_ok ? eval_loss(builder, params) : 0.0;
        row[i] = saved - h;
        const bool minus_ok = !is_ball || norm(row) < 1.0 - kBallEps;
        const double f_minus = minus_ok ? eval_loss(builder, params) : 0.0;
        row[i] = saved;
        if (plus_ok && minus_ok) {
          numeric = (f_plus - f_minus) / (2.0 * h);
          f_ref_plus = f_plus;
          f_ref_minus = f_minus;
          break;
        }
        if (attempt >= 1)
          throw NumericError("finite_diff_check: perturbation leaves the ball even after "
                             "shrinking the step");
        h = step / 10.0;
      }

      const double analytic = grads.row(b, r)[i];
      const double diff = std::abs(analytic - numeric);
      // Central differences carry cancellation noise of order eps*|f|/2h;
      // differences below that bound are agreement, not error (otherwise
      // disconnected parameters with exactly-zero gradients would report
      // the quotient of rounding noise and the 1e-8 floor).
      const double noise =
          8.0 * 2.220446049250313e-16 * std::max({1.0, std::abs(f_ref_plus),
                                                   std::abs(f_ref_minus)}) / (2.0 * h);
      if (diff > noise) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        result.max_rel_err = std::max(result.max_rel_err, diff / denom);
      }
      ++result.coords_checked;
    }
  }
  return result;
}

// --- suite -------------------------------------------------------------------

namespace {

constexpr std::int32_t kSuiteDim = 4;
constexpr std::int32_t kSuiteHidden = 8;

// Small store with all rows randomized and ball rows kept well inside the
// shell (norms <= 0.9 nudged further in for finite differences).
ParameterStore make_store(std::uint64_t seed, bool trainable_c = false) {
  ParameterStore store(kSuiteDim, kSuiteHidden, 6, 3, Curvature{1.0, trainable_c});
  init_params(store, seed);
  Rng rng(derive_seed(seed, "suite_store"));
  // Spread the geometry out more than the training init does so the checks
  // exercise nontrivial curvature terms.
  for (std::int32_t b : {block::kEntityCen, block::kRelCen}) {
    for (std::int32_t r = 0; r < store.shape(b).rows; ++r) {
      auto row = store.row(b, r);
      for (double& x : row) x = rng.uniform(-0.45, 0.45);
      const double n = norm(row);
      if (n > 0.8) {
        for (double& x : row) x *= 0.8 / n;
      }
    }
  }
  for (std::int32_t b : {block::kEntityLim, block::kRelLim})
    for (std::int32_t r = 0; r < store.shape(b).rows; ++r)
      for (double& x : store.row(b, r)) x = rng.uniform(0.0, 0.4);
  if (trainable_c) store.flat(block::kCurvature)[0] = rng.uniform(0.5, 1.5);
  return store;
}

std::vector<double> random_weights(Rng& rng, std::int32_t n) {
  std::vector<double> w(n);
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

ad::NodeId curvature_node(ad::Tape& t, const ParameterStore& s) {
  if (s.curvature_trainable()) return t.param({block::kCurvature, 0}, s.flat(block::kCurvature));
  return t.constant(s.flat(block::kCurvature));
}

ad::NodeId ball_row(ad::Tape& t, const ParameterStore& s, std::int32_t r) {
  return t.param({block::kEntityCen, r}, s.row(block::kEntityCen, r));
}

ad::NodeId lim_row(ad::Tape& t, const ParameterStore& s, std::int32_t r) {
  return t.param({block::kEntityLim, r}, s.row(block::kEntityLim, r));
}

struct SuiteOp {
  std::string name;
  // Builds the loss for one config; receives a per-config rng for constants.
  std::function<ad::NodeId(ad::Tape&, const ParameterStore&, Rng&)> build;
  bool trainable_c = false;
  std::int32_t max_coords = 0;  // 0: sweep everything
};

DnfQuery compound_query(StructureTag tag) {
  // Fixed shapes over the 6-entity/3-relation suite store.
  const auto e = [](EntityId id) { return QueryAst::entity(id); };
  QueryAst q;
  switch (tag) {
    case StructureTag::t1:
      q = QueryAst::translate(e(0), 0);
      break;
    case StructureTag::pi:
      q = QueryAst::intersect(
          {QueryAst::translate(QueryAst::translate(e(0), 0), 1), QueryAst::translate(e(1), 2)});
      break;
    case StructureTag::ip:
      q = QueryAst::translate(
          QueryAst::intersect({QueryAst::translate(e(0), 0), QueryAst::translate(e(1), 1)}), 2);
      break;
    case StructureTag::up:
      q = QueryAst::translate(QueryAst::unite({e(0), e(1)}), 0);
      break;
    default:
      throw UsageError("unsupported suite query tag");
  }
  return to_dnf(q);
}

ad::NodeId full_loss(ad::Tape& t, const ParameterStore& s, const ModelConfig& cfg,
                     const DnfQuery& dnf) {
  TapeCtx ctx(t, s, cfg);
  const std::vector<EntityId> negatives{2, 3, 4, 5};
  return t_pair_loss(ctx, dnf, 1, negatives);
}

std::vector<SuiteOp> suite_ops() {
  std::vector<SuiteOp> ops;
  const auto weighted = [](ad::Tape& t, ad::NodeId v, Rng& rng) {
    return t.dot(v, t.constant(random_weights(rng, t.dim(v))));
  };

  ops.push_back({"mobius_add", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    return weighted(t, ad::t_mobius_add(t, ball_row(t, s, 0), ball_row(t, s, 1),
                                        curvature_node(t, s)), rng);
  }});
  ops.push_back({"mobius_sub", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    return weighted(t, ad::t_mobius_sub(t, ball_row(t, s, 0), ball_row(t, s, 1),
                                        curvature_node(t, s)), rng);
  }});
  ops.push_back({"mobius_scalar", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    const double r = rng.uniform(-2.0, 2.0);
    return weighted(t, ad::t_mobius_scalar(t, r, ball_row(t, s, 0), curvature_node(t, s)), rng);
  }});
  ops.push_back({"exp_map", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    // Tangent argument borrowed from a Euclidean parameter row.
    ad::NodeId v = t.param({block::kAttB2, 0}, s.flat(block::kAttB2));
    return weighted(t, ad::t_exp_at(t, ball_row(t, s, 0), v, curvature_node(t, s)), rng);
  }});
  ops.push_back({"log_map", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    return weighted(t, ad::t_log_at(t, ball_row(t, s, 0), ball_row(t, s, 1),
                                    curvature_node(t, s)), rng);
  }});
  ops.push_back({"conformal_factor", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    return ad::t_conformal(t, ball_row(t, s, 0));
  }});
  ops.push_back({"hyp_distance", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    return ad::t_distance(t, ball_row(t, s, 0), ball_row(t, s, 1));
  }});
  ops.push_back({"corners", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    const auto box = ad::t_corners(t, {ball_row(t, s, 0), lim_row(t, s, 0)},
                                   curvature_node(t, s));
    return t.add(weighted(t, box.q_min, rng), weighted(t, box.q_max, rng));
  }});
  ops.push_back({"translate", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    ad::TapeBox e{ball_row(t, s, 0), lim_row(t, s, 0)};
    ad::TapeBox r{t.param({block::kRelCen, 0}, s.row(block::kRelCen, 0)),
                  t.param({block::kRelLim, 0}, s.row(block::kRelLim, 0))};
    const auto o = ad::t_translate(t, e, r, curvature_node(t, s));
    return t.add(weighted(t, o.cen, rng), weighted(t, o.lim, rng));
  }});

  const auto box_loss = [](DistanceWeights w) {
    return [w](ad::Tape& t, const ParameterStore& s, Rng&) {
      ad::NodeId c = curvature_node(t, s);
      const auto box = ad::t_corners(t, {ball_row(t, s, 0), lim_row(t, s, 0)}, c);
      return ad::t_box_dist_composite(t, ball_row(t, s, 1), box, c, w);
    };
  };
  DistanceWeights w_e;  // elementwise euclidean
  DistanceWeights w_m;
  w_m.combine_mode = DistanceWeights::Combine::mobius;
  DistanceWeights w_lit;
  w_lit.reading = DistanceWeights::Reading::literal;
  ops.push_back({"d_hyp_elementwise", box_loss(w_e)});
  ops.push_back({"d_hyp_mobius_combine", box_loss(w_m)});
  ops.push_back({"d_hyp_literal", box_loss(w_lit)});
  ops.push_back({"d_hyp_fused", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    ad::NodeId c = curvature_node(t, s);
    const auto box = ad::t_corners(t, {ball_row(t, s, 0), lim_row(t, s, 0)}, c);
    return t.box_dist(ball_row(t, s, 1), box, c, 0.5, DistanceWeights::Combine::euclidean);
  }});
  ops.push_back({"d_hyp_fused_mobius", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    ad::NodeId c = curvature_node(t, s);
    const auto box = ad::t_corners(t, {ball_row(t, s, 0), lim_row(t, s, 0)}, c);
    return t.box_dist(ball_row(t, s, 1), box, c, 0.5, DistanceWeights::Combine::mobius);
  }});

  ops.push_back({"sigmoid", [weighted](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    return weighted(t, t.sigmoid(t.param({block::kAttB2, 0}, s.flat(block::kAttB2))), rng);
  }});
  ops.push_back({"log_sigmoid", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    return t.sum(t.log_sigmoid(t.param({block::kAttB2, 0}, s.flat(block::kAttB2))));
  }});
  ops.push_back({"l1_norm", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    return t.sum(t.absval(t.param({block::kAttB2, 0}, s.flat(block::kAttB2))));
  }});
  ops.push_back({"min_max_clamp", [](ad::Tape& t, const ParameterStore& s, Rng&) {
    ad::NodeId x = t.param({block::kAttB2, 0}, s.flat(block::kAttB2));
    ad::NodeId lo = t.param({block::kSetOutB2, 0}, s.flat(block::kSetOutB2));
    ad::NodeId hi = t.param({block::kCtrOutB2, 0}, s.flat(block::kCtrOutB2));
    return t.sum(t.minimum(hi, t.maximum(lo, x)));
  }});

  const auto mlp_op = [](ad::Tape& t, const ParameterStore& s, Rng& rng) {
    TapeCtx ctx(t, s, ModelConfig{});  // unused cfg fields
    ad::TapeBox e = t_entity(ctx, 0);
    ad::NodeId x = t.concat(e.cen, e.lim);
    ad::NodeId w1 = ctx.flat_param(block::kAttW1);
    ad::NodeId b1 = ctx.flat_param(block::kAttB1);
    ad::NodeId h = t.relu(t.add(t.matvec(w1, x, s.hidden()), b1));
    ad::NodeId out = t.add(t.matvec(ctx.flat_param(block::kAttW2), h, s.dim()),
                           ctx.flat_param(block::kAttB2));
    return t.dot(out, t.constant(random_weights(rng, s.dim())));
  };
  ops.push_back({"mlp_layer", mlp_op, false, 24});

  const auto agg_op = [](ModelConfig::CenterAgg mode) {
    return [mode](ad::Tape& t, const ParameterStore& s, Rng& rng) {
      ModelConfig cfg;
      cfg.d = s.dim();
      cfg.hidden = s.hidden();
      cfg.center_agg = mode;
      TapeCtx ctx(t, s, cfg);
      const QueryAst q = QueryAst::intersect(
          {QueryAst::entity(0), QueryAst::entity(1), QueryAst::entity(2)});
      const ad::TapeBox box = t_embed_query(ctx, q);
      return t.add(t.dot(box.cen, t.constant(random_weights(rng, s.dim()))),
                   t.dot(box.lim, t.constant(random_weights(rng, s.dim()))));
    };
  };
  ops.push_back({"attention_aggregation", agg_op(ModelConfig::CenterAgg::attention), false, 24});
  ops.push_back({"deepsets_aggregation", agg_op(ModelConfig::CenterAgg::deepsets), false, 24});
  ops.push_back({"avg_aggregation", agg_op(ModelConfig::CenterAgg::avg), false, 24});

  const auto loss_op = [](StructureTag tag, bool trainable_c, DistanceWeights w) {
    SuiteOp op;
    op.name = std::string("loss_") + to_string(tag);
    if (trainable_c) op.name += "_trainable_c";
    if (w.reading == DistanceWeights::Reading::literal) op.name += "_literal";
    if (w.combine_mode == DistanceWeights::Combine::mobius) op.name += "_mobius";
    op.trainable_c = trainable_c;
    op.max_coords = 24;
    op.build = [tag, w](ad::Tape& t, const ParameterStore& s, Rng&) {
      ModelConfig cfg;
      cfg.d = s.dim();
      cfg.hidden = s.hidden();
      cfg.dist = w;
      cfg.margin = 2.0;
      return full_loss(t, s, cfg, compound_query(tag));
    };
    return op;
  };
  ops.push_back(loss_op(StructureTag::t1, false, w_e));
  ops.push_back(loss_op(StructureTag::pi, false, w_e));
  ops.push_back(loss_op(StructureTag::pi, true, w_e));
  ops.push_back(loss_op(StructureTag::pi, false, w_m));
  ops.push_back(loss_op(StructureTag::pi, false, w_lit));
  ops.push_back(loss_op(StructureTag::ip, false, w_e));
  ops.push_back(loss_op(StructureTag::up, false, w_e));
  return ops;
}

}  // namespace

GradientReport run_gradcheck_suite(std::uint64_t seed, std::int32_t configs_per_op) {
  GradientReport report;
  for (const SuiteOp& op : suite_ops()) {
    GradientReport::Entry entry;
    entry.name = op.name;
    entry.configs = configs_per_op;
    for (std::int32_t cfg_idx = 0; cfg_idx < configs_per_op; ++cfg_idx) {
      const std::uint64_t cfg_seed = derive_seed(seed, op.name, cfg_idx);
      ParameterStore store = make_store(cfg_seed, op.trainable_c);
      const LossBuilder builder = [&](ad::Tape& t, const ParameterStore& s) {
        Rng local(derive_seed(cfg_seed, "consts"));  // same constants every eval
        return op.build(t, s, local);
      };
      const auto result =
          finite_diff_check(builder, store, 1e-6, op.max_coords, cfg_seed);
      entry.max_rel_err = std::max(entry.max_rel_err, result.max_rel_err);
      entry.coords_checked += result.coords_checked;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::string format_report(const GradientReport& report, double tol) {
  std::ostringstream out;
  out << "operation                         max_rel_err   coords  configs  status\n";
  for (const auto& e : report.entries) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-32s %12.3e %8lld %8d  %s\n", e.name.c_str(),
                  e.max_rel_err, static_cast<long long>(e.coords_checked), e.configs,
                  e.max_rel_err < tol ? "ok" : "FAIL");
    out << line;
  }
  char total[96];
  std::snprintf(total, sizeof(total), "overall max relative error: %.3e (tolerance %.1e)\n",
                report.max_rel_err(), tol);
  out << total;
  return out.str();
}

}  // namespace horo
