#include "horo/optim.hpp"

#include <algorithm>
#include <cmath>

namespace horo {

void OptimState::configure(const ParameterStore& store) {
  const auto shapes = store.shapes();
  m.resize(shapes.size());
  v.resize(shapes.size());
  for (std::size_t b = 0; b < shapes.size(); ++b) {
    const auto n = static_cast<std::size_t>(shapes[b].rows) * shapes[b].row_len;
    m[b].assign(n, 0.0);
    v[b].assign(n, 0.0);
  }
  step_count = 0;
}

void riemannian_scale(std::span<const double> g, std::span<const double> x,
                      std::span<double> out) {
  const double f = 1.0 - norm_sq(x);
  const double s = f * f / 4.0;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * s;
}

void optim_step(ParameterStore& store, const ad::GradientBuffer& grads, OptimState& state) {
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  std::vector<double> scaled;
  std::vector<double> direction;
  std::vector<double> updated;

  for (std::int32_t b = 0; b < block::kCount; ++b) {
    const auto shape = store.shape(b);
    const ManifoldKind kind = store.kind(b);
    if (b == block::kCurvature && !store.curvature_trainable()) continue;

    for (std::int32_t r = 0; r < shape.rows; ++r) {
      const auto g = grads.row(b, r);
      auto x = store.row(b, r);
      const std::size_t off = static_cast<std::size_t>(r) * shape.row_len;
      double* mrow = state.m[b].data() + off;
      double* vrow = state.v[b].data() + off;

      scaled.assign(g.begin(), g.end());
      if (kind == ManifoldKind::ball) riemannian_scale(g, x, scaled);

      direction.resize(scaled.size());
      for (std::size_t i = 0; i < scaled.size(); ++i) {
        const double gi = scaled[i];
        if (!std::isfinite(gi))
          throw NumericError(std::string("optim_step: non-finite gradient in ") +
                             ParameterStore::block_name(b));
        mrow[i] = state.beta1 * mrow[i] + (1.0 - state.beta1) * gi;
        vrow[i] = state.beta2 * vrow[i] + (1.0 - state.beta2) * gi * gi;
        const double mhat = mrow[i] / bc1;
        const double vhat = vrow[i] / bc2;
        direction[i] = state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }

      switch (kind) {
        case ManifoldKind::ball: {
          // Retraction along the negative update direction.
          for (double& u : direction) u = -u;
          updated.resize(x.size());
          gyro::exp_map(x, direction, store.curvature(), updated);
          gyro::project_in_place(updated);
          std::copy(updated.begin(), updated.end(), x.begin());
          break;
        }
        case ManifoldKind::nonneg: {
          // Limits stay inside [0, 1 - eps]: nonnegative by the model
          // contract, below 1 so 1-D gyro corners remain in-domain.
          for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::clamp(x[i] - direction[i], 0.0, 1.0 - kBallEps);
          break;
        }
        case ManifoldKind::euclid: {
          for (std::size_t i = 0; i < x.size(); ++i) x[i] -= direction[i];
          if (b == block::kCurvature && x[0] < 1e-6) x[0] = 1e-6;  // c > 0 invariant
          break;
        }
      }
      for (double xi : x)
        if (!std::isfinite(xi))
          throw NumericError(std::string("optim_step: non-finite parameter in ") +
                             ParameterStore::block_name(b));
    }
  }
}

}  // namespace horo
