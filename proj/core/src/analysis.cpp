#include "horo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace horo {

namespace {

double entity_distance(const ParameterStore& params, EntityId a, EntityId b,
                       DistanceMetric metric) {
  const auto x = params.row(block::kEntityCen, a);
  const auto y = params.row(block::kEntityCen, b);
  if (metric == DistanceMetric::hyp) return gyro::distance(x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double delta_intra(std::span<const EntityId> entities, const ParameterStore& params,
                   DistanceMetric metric, bool conventional) {
  const std::size_t n = entities.size();
  if (n < 2) throw UsageError("delta_intra: need at least two entities");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      acc += entity_distance(params, entities[i], entities[j], metric);
  if (conventional)
    return acc / (static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0);
  return acc / (static_cast<double>(n) * (static_cast<double>(n) - 1.0));
}

double delta_inter(std::span<const EntityId> a, std::span<const EntityId> b,
                   const ParameterStore& params, DistanceMetric metric) {
  if (a.empty() || b.empty()) throw UsageError("delta_inter: empty level");
  double acc = 0.0;
  for (EntityId ea : a)
    for (EntityId eb : b) acc += entity_distance(params, ea, eb, metric);
  return acc / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

DistanceAnalysis analyze_distances(const TripleStore& tree, const ParameterStore& params,
                                   DistanceMetric metric) {
  const auto depth = node_depths(tree);
  const std::int32_t max_depth = *std::max_element(depth.begin(), depth.end());
  std::vector<std::vector<EntityId>> by_level(max_depth + 1);
  for (EntityId e = 0; e < tree.entity_count(); ++e) by_level[depth[e]].push_back(e);

  DistanceAnalysis out;
  for (std::int32_t l = 0; l <= max_depth; ++l) {
    if (by_level[l].size() < 2) continue;  // singleton levels carry no intra distance
    out.levels.push_back(l);
    out.level_sizes.push_back(static_cast<std::int64_t>(by_level[l].size()));
    out.intra.push_back(delta_intra(by_level[l], params, metric));
  }
  out.inter.assign(out.levels.size(), std::vector<double>(out.levels.size(), 0.0));
  for (std::size_t i = 0; i < out.levels.size(); ++i)
    for (std::size_t j = 0; j < out.levels.size(); ++j)
      out.inter[i][j] =
          delta_inter(by_level[out.levels[i]], by_level[out.levels[j]], params, metric);
  return out;
}

std::string distance_analysis_csv(const DistanceAnalysis& analysis) {
  std::ostringstream out;
  out << "section,level,entities,delta_intra\n";
  for (std::size_t i = 0; i < analysis.levels.size(); ++i)
    out << "intra," << analysis.levels[i] << "," << analysis.level_sizes[i] << ","
        << format_double(analysis.intra[i]) << "\n";
  out << "section,level_a,level_b,delta_inter\n";
  for (std::size_t i = 0; i < analysis.levels.size(); ++i)
    for (std::size_t j = 0; j < analysis.levels.size(); ++j)
      out << "inter," << analysis.levels[i] << "," << analysis.levels[j] << ","
          << format_double(analysis.inter[i][j]) << "\n";
  return out.str();
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, n x n).
// Small n only; returns eigenvalues and column eigenvectors.
void jacobi_eigen(std::vector<double> a, std::int32_t n, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors) {
  eigenvectors.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (std::int32_t i = 0; i < n; ++i) eigenvectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::int32_t i = 0; i < n; ++i)
      for (std::int32_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    if (off < 1e-26) break;
    for (std::int32_t p = 0; p < n; ++p) {
      for (std::int32_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::int32_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::int32_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::int32_t k = 0; k < n; ++k) {
          const double vkp = eigenvectors[k * n + p];
          const double vkq = eigenvectors[k * n + q];
          eigenvectors[k * n + p] = c * vkp - s * vkq;
          eigenvectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (std::int32_t i = 0; i < n; ++i) eigenvalues[i] = a[i * n + i];
}

}  // namespace

Projected2D pca_project_2d(std::span<const Hyperboloid> regions) {
  if (regions.size() < 2) throw UsageError("pca_project_2d: need at least two regions");
  const auto d = static_cast<std::int32_t>(regions[0].dim());
  const std::int32_t w = 2 * d;
  const auto n = static_cast<std::int32_t>(regions.size());

  // Concatenated (cen, lim) rows, mean-centered.
  std::vector<double> rows(static_cast<std::size_t>(n) * w);
  for (std::int32_t i = 0; i < n; ++i) {
    for (std::int32_t j = 0; j < d; ++j) {
      rows[i * w + j] = regions[i].cen[j];
      rows[i * w + d + j] = regions[i].lim[j];
    }
  }
  std::vector<double> mean(w, 0.0);
  for (std::int32_t i = 0; i < n; ++i)
    for (std::int32_t j = 0; j < w; ++j) mean[j] += rows[i * w + j];
  for (double& m : mean) m /= n;
  for (std::int32_t i = 0; i < n; ++i)
    for (std::int32_t j = 0; j < w; ++j) rows[i * w + j] -= mean[j];

  std::vector<double> cov(static_cast<std::size_t>(w) * w, 0.0);
  for (std::int32_t i = 0; i < n; ++i)
    for (std::int32_t a = 0; a < w; ++a)
      for (std::int32_t b = a; b < w; ++b) cov[a * w + b] += rows[i * w + a] * rows[i * w + b];
  for (std::int32_t a = 0; a < w; ++a)
    for (std::int32_t b = 0; b < a; ++b) cov[a * w + b] = cov[b * w + a];

  Projected2D out;
  out.centers.assign(n, {0.0, 0.0});
  out.limits.assign(n, {0.0, 0.0});

  double total_var = 0.0;
  for (std::int32_t a = 0; a < w; ++a) total_var += cov[a * w + a];
  if (total_var < 1e-24) {
    out.degenerate = true;  // all regions identical: project to the origin
    return out;
  }

  std::vector<double> eigenvalues, eigenvectors;
  jacobi_eigen(cov, w, eigenvalues, eigenvectors);
  std::array<std::int32_t, 2> top{0, 0};
  {
    std::vector<std::int32_t> order(w);
    for (std::int32_t i = 0; i < w; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::int32_t a, std::int32_t b) { return eigenvalues[a] > eigenvalues[b]; });
    top = {order[0], order[w > 1 ? 1 : 0]};
  }

  std::array<std::vector<double>, 2> axis;
  for (int k = 0; k < 2; ++k) {
    axis[k].resize(w);
    for (std::int32_t j = 0; j < w; ++j) axis[k][j] = eigenvectors[j * w + top[k]];
    // Deterministic orientation: the largest-magnitude component is positive.
    std::int32_t arg = 0;
    for (std::int32_t j = 1; j < w; ++j)
      if (std::abs(axis[k][j]) > std::abs(axis[k][arg])) arg = j;
    if (axis[k][arg] < 0.0)
      for (double& v : axis[k]) v = -v;
  }

  for (std::int32_t i = 0; i < n; ++i) {
    for (int k = 0; k < 2; ++k) {
      double proj = 0.0;
      for (std::int32_t j = 0; j < w; ++j) proj += rows[i * w + j] * axis[k][j];
      out.centers[i][k] = proj;
      // Image of the axis-aligned extent under the projection: limits act on
      // the center coordinates only.
      double extent = 0.0;
      for (std::int32_t j = 0; j < d; ++j) extent += std::abs(axis[k][j]) * regions[i].lim[j];
      out.limits[i][k] = extent;
    }
  }

  double max_norm = 0.0;
  for (const auto& cpt : out.centers)
    max_norm = std::max(max_norm, std::sqrt(cpt[0] * cpt[0] + cpt[1] * cpt[1]));
  if (max_norm > 0.0) {
    const double f = 0.95 / max_norm;
    for (std::int32_t i = 0; i < n; ++i)
      for (int k = 0; k < 2; ++k) {
        out.centers[i][k] *= f;
        out.limits[i][k] *= f;
      }
  }
  return out;
}

std::string viz_export_json(const Projected2D& proj, std::span<const VizEntry> entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < proj.centers.size(); ++i) {
    nlohmann::json item;
    item["id"] = entries[i].id;
    item["label"] = entries[i].label;
    item["level"] = entries[i].level;
    item["center"] = {proj.centers[i][0], proj.centers[i][1]};
    item["limit"] = {proj.limits[i][0], proj.limits[i][1]};
    arr.push_back(std::move(item));
  }
  return arr.dump(2) + "\n";
}

std::string viz_export_svg(const Projected2D& proj, std::span<const VizEntry> entries) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1.1 -1.1 2.2 2.2\">\n";
  svg << "  <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#444\" "
         "stroke-width=\"0.004\"/>\n";
  std::int32_t max_level = 0;
  for (const auto& e : entries) max_level = std::max(max_level, e.level);
  for (std::size_t i = 0; i < proj.centers.size(); ++i) {
    const double cx = proj.centers[i][0];
    const double cy = -proj.centers[i][1];
    // Extents drawn at 10x, matching the display convention of the exporter.
    const double lx = std::max(proj.limits[i][0] * 10.0, 0.004);
    const double ly = std::max(proj.limits[i][1] * 10.0, 0.004);
    const int hue = max_level > 0 ? 210 * entries[i].level / max_level : 0;
    svg << "  <rect x=\"" << cx - lx << "\" y=\"" << cy - ly << "\" width=\"" << 2 * lx
        << "\" height=\"" << 2 * ly << "\" rx=\"" << 0.3 * std::min(lx, ly)
        << "\" fill=\"hsl(" << hue << ",70%,50%)\" fill-opacity=\"0.35\" stroke=\"hsl(" << hue
        << ",70%,35%)\" stroke-width=\"0.002\"><title>" << entries[i].label
        << "</title></rect>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace horo
