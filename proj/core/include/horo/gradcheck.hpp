#pragma once

#include <functional>
#include <string>

#include "horo/model.hpp"

namespace horo {

// Emits a scalar loss over the store's parameters onto a fresh tape.
using LossBuilder = std::function<ad::NodeId(ad::Tape&, const ParameterStore&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::int64_t coords_checked = 0;
};

struct GradientReport {
  struct Entry {
    std::string name;
    double max_rel_err = 0.0;
    std::int64_t coords_checked = 0;
    std::int32_t configs = 0;
  };
  std::vector<Entry> entries;

  double max_rel_err() const;
  bool passed(double tol = 1e-4) const { return max_rel_err() < tol; }
};

// Central finite differences against the tape's reverse-mode gradients.
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
// Perturbations that would push a ball row onto the shell shrink the step
// once and retry; a second failure throws NumericError. When
// max_coords_per_block > 0 only a seeded subset of coordinates is probed.
GradCheckResult finite_diff_check(const LossBuilder& builder, ParameterStore& params,
                                  double step = 1e-6, std::int32_t max_coords_per_block = 0,
                                  std::uint64_t coord_seed = 0);

// The per-operation sweep: every gyrovector/region/aggregation/loss operation
// at d = 4 plus full compound-query losses, `configs_per_op` seeded
// configurations each.
GradientReport run_gradcheck_suite(std::uint64_t seed, std::int32_t configs_per_op = 100);

// Line-oriented text table of the report.
std::string format_report(const GradientReport& report, double tol = 1e-4);

}  // namespace horo
