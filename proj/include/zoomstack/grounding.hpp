#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "zoomstack/blend.hpp"
#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

/// Pulls the clean-image estimates towards a photograph of the most
/// zoomed-out view before each blend.
struct GroundingConfig {
  Image target;  // xi, H x W x C in [-1, 1]
  int steps = 5;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate(const ZoomSchedule& s) const {
    if (steps < 0) throw ValidationError("grounding steps must be >= 0");
    if (!(learning_rate > 0.0)) throw ValidationError("grounding learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ValidationError("Adam betas must lie in [0, 1)");
    s.check_image(target, "grounding target");
    require_finite(target, "grounding target");
  }
};

/// Adam moments for every level's estimate.
struct AdamState {
  std::vector<Image> first;
  std::vector<Image> second;
  int step = 0;

  void reset() {
    first.clear();
    second.clear();
    step = 0;
  }
};

namespace detail {

// D_i(x_i) - M_i * xi; zero outside the central H/p^i crop.
inline Image grounding_residual(const ZoomSchedule& s, const Image& estimate, int level, const Image& xi) {
  return downscale(estimate, s.p(), level) - CenterMask(s, level).apply(xi);
}

}  // namespace detail

/// sum_i || D_i(x_i) - M_i * xi ||^2 over pixels, channels and levels.
inline double grounding_loss(const ObservationSet& obs, const Image& xi) {
  const auto& s = obs.schedule();
  s.check_image(xi, "grounding target");
  double loss = 0.0;
  for (int i = 0; i < s.levels(); ++i)
    loss += squared_norm(detail::grounding_residual(s, obs.estimate(i), i, xi));
  return loss;
}

/// d loss / d x_i = 2 D_i^T (D_i(x_i) - M_i * xi). Levels are independent.
inline Image grounding_grad_level(const ObservationSet& obs, const Image& xi, int level) {
  const auto& s = obs.schedule();
  return 2.0 * downscale_adjoint(detail::grounding_residual(s, obs.estimate(level), level, xi), s.p(), level);
}

inline std::vector<Image> grounding_grad(const ObservationSet& obs, const Image& xi) {
  obs.schedule().check_image(xi, "grounding target");
  std::vector<Image> grads;
  grads.reserve(obs.levels());
  for (int i = 0; i < obs.levels(); ++i) grads.push_back(grounding_grad_level(obs, xi, i));
  return grads;
}

/// Runs `config.steps` Adam iterations on the grounding loss and returns the
/// updated estimates clamped to [-1, 1]. With `only_level` set, the other
/// levels are left untouched (their loss terms do not depend on it).
///
/// `losses`, when given, receives the loss before each step and after the last.
inline ObservationSet apply_grounding(const ObservationSet& obs, const GroundingConfig& config,
                                      AdamState& state, std::vector<double>* losses = nullptr,
                                      std::optional<int> only_level = std::nullopt) {
  const auto& s = obs.schedule();
  config.validate(s);
  if (only_level) s.check_level(*only_level);
  for (int i = 0; i < s.levels(); ++i)
    if (!all_finite(obs.estimate(i)))
      throw InvariantError("non-finite estimate at level " + std::to_string(i) + " before grounding");
  ObservationSet out = obs;
  if (state.first.size() != static_cast<std::size_t>(s.levels())) {
    state.first.assign(s.levels(), s.blank());
    state.second.assign(s.levels(), s.blank());
  }
  auto record = [&] {
    const double loss = grounding_loss(out, config.target);
    if (!std::isfinite(loss)) throw InvariantError("grounding loss is not finite");
    if (losses) losses->push_back(loss);
  };

  for (int it = 0; it < config.steps; ++it) {
    record();
    ++state.step;
    const double c1 = 1.0 - std::pow(config.beta1, state.step);
    const double c2 = 1.0 - std::pow(config.beta2, state.step);
    for (int i = 0; i < s.levels(); ++i) {
      if (only_level && *only_level != i) continue;
      const Image g = grounding_grad_level(out, config.target, i);
      auto gv = g.values();
      auto m = state.first[i].values();
      auto v = state.second[i].values();
      auto x = out.estimate(i).values();
      for (std::size_t k = 0; k < x.size(); ++k) {
        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * gv[k];
        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * gv[k] * gv[k];
        x[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.epsilon);
      }
    }
  }
  if (config.steps > 0) record();
  for (int i = 0; i < s.levels(); ++i)
    if (!only_level || *only_level == i) clamp_inplace(out.estimate(i));
  return out;
}

}  // namespace zoomstack
