#pragma once

#include <string>

#include "horo/model.hpp"

namespace horo {

enum class DistanceMetric { hyp, euclid };

// Mean pairwise distance within one entity set, with the as-published
// normalization: sum over j >= i (self pairs included once) divided by
// n(n-1). The conventional mean over distinct unordered pairs is available
// behind the flag. Throws on singleton sets.
double delta_intra(std::span<const EntityId> entities, const ParameterStore& params,
                   DistanceMetric metric, bool conventional = false);

// Mean distance over the full cross product of two nonempty entity sets.
double delta_inter(std::span<const EntityId> a, std::span<const EntityId> b,
                   const ParameterStore& params, DistanceMetric metric);

struct DistanceAnalysis {
  std::vector<std::int32_t> levels;            // levels with >= 2 entities
  std::vector<std::int64_t> level_sizes;
  std::vector<double> intra;                   // aligned with levels
  std::vector<std::vector<double>> inter;      // levels x levels
};

// Per-depth-level intra distances plus the cross-level matrix for a
// hierarchy; levels are node depths.
DistanceAnalysis analyze_distances(const TripleStore& tree, const ParameterStore& params,
                                   DistanceMetric metric);
std::string distance_analysis_csv(const DistanceAnalysis& analysis);

struct Projected2D {
  std::vector<std::array<double, 2>> centers;  // max norm rescaled to 0.95
  std::vector<std::array<double, 2>> limits;   // same global factor
  bool degenerate = false;                     // rank-deficient input
};

// Euclidean PCA over the concatenated (cen, lim) vectors; positions are the
// top-2 projections, 2-D extents are the axis-aligned box images under the
// same projection. One global factor rescales the largest position norm to
// 0.95 so everything stays inside the drawn unit disk.
Projected2D pca_project_2d(std::span<const Hyperboloid> regions);

struct VizEntry {
  std::string id;
  std::string label;
  std::int32_t level = 0;
};

// JSON array of {id, label, level, center:[x,y], limit:[lx,ly]}.
std::string viz_export_json(const Projected2D& proj, std::span<const VizEntry> entries);
// Static unit-disk SVG; drawn extents are scaled 10x for legibility.
std::string viz_export_svg(const Projected2D& proj, std::span<const VizEntry> entries);

}  // namespace horo
