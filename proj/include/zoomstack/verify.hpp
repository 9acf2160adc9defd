#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "zoomstack/blend.hpp"
#include "zoomstack/grounding.hpp"
#include "zoomstack/pyramid.hpp"
#include "zoomstack/rng.hpp"
#include "zoomstack/synthetic.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

// Quick built-in property checks, run by `zoomstack verify`. These are
// smaller versions of the test-suite checks, meant as a sanity pass on a
// freshly built binary.

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline ZoomStack random_stack(const ZoomSchedule& s, std::uint64_t seed) {
  std::vector<Image> layers;
  for (int j = 0; j < s.levels(); ++j)
    layers.push_back(uniform_image(s.height(), s.width(), s.channels(), seed, static_cast<std::uint32_t>(j)));
  return ZoomStack(s, std::move(layers));
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

inline SuiteResult verify_consistency(int trials = 20) {
  double worst = 0.0;
  const int configs[][2] = {{2, 2}, {2, 3}, {2, 4}, {4, 2}, {4, 3}};
  int k = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto& pn = configs[trial % std::size(configs)];
    const ZoomSchedule s(pn[0], pn[1], 64, 64, 3);
    worst = std::max(worst, consistency_error(detail::random_stack(s, 1000 + trial)));
    ++k;
  }
  return {"consistency", worst < 1e-6, std::to_string(k) + " stacks, max diff " + detail::fmt(worst)};
}

inline SuiteResult verify_noise_stats(int samples = 10000) {
  const ZoomSchedule s(2, 3, 8, 8, 1);
  const std::size_t per = static_cast<std::size_t>(s.height()) * s.width();
  std::vector<double> sum(per * s.levels()), sq(per * s.levels());
  for (int n = 0; n < samples; ++n) {
    const NoiseStack e = sample_noise_stack(s, 77, static_cast<std::uint32_t>(n + 1));
    for (int i = 0; i < s.levels(); ++i) {
      const Image r = render_noise(e, i, NoiseMode::kExact);
      auto v = r.values();
      for (std::size_t k = 0; k < per; ++k) {
        sum[i * per + k] += v[k];
        sq[i * per + k] += v[k] * v[k];
      }
    }
  }
  double worst_mean = 0.0, worst_var = 0.0;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    const double m = sum[k] / samples;
    const double var = sq[k] / samples - m * m;
    worst_mean = std::max(worst_mean, std::abs(m));
    worst_var = std::max(worst_var, std::abs(var - 1.0));
  }
  const bool ok = worst_mean < 0.05 && worst_var < 0.1;
  return {"noise-stats", ok,
          std::to_string(samples) + " samples, max |mean| " + detail::fmt(worst_mean) + ", max |var-1| " +
              detail::fmt(worst_var)};
}

inline SuiteResult verify_pyramid(int trials = 20) {
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const Image x = uniform_image(64, 64, 3, 2000 + trial);
    worst = std::max(worst, max_abs_diff(recompose(build_laplacian(x)), x));
  }
  return {"pyramid-identity", worst < 1e-6, std::to_string(trials) + " images, max diff " + detail::fmt(worst)};
}

inline SuiteResult verify_blend_fixed_point() {
  const ZoomSchedule s(2, 3, 64, 64, 3);
  const ObservationSet obs = render_all(smooth_scene_stack(s, 5));
  const ObservationSet again = render_all(blend_stack(obs));
  double worst = 0.0;
  for (int i = 0; i < s.levels(); ++i) worst = std::max(worst, max_abs_diff(again.estimate(i), obs.estimate(i)));
  return {"blend-fixed-point", worst < 2e-2, "max diff " + detail::fmt(worst)};
}

inline SuiteResult verify_grounding_gradient() {
  const ZoomSchedule s(2, 2, 16, 16, 1);
  std::vector<Image> est;
  for (int i = 0; i < s.levels(); ++i) est.push_back(uniform_image(16, 16, 1, 3000, i));
  const ObservationSet obs(s, est);
  const Image xi = uniform_image(16, 16, 1, 3001);
  const auto grad = grounding_grad(obs, xi);
  double worst = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < s.levels(); ++i)
    for (int r = 0; r < 16; r += 5)
      for (int c = 0; c < 16; c += 3) {
        ObservationSet plus = obs, minus = obs;
        plus.estimate(i)(r, c, 0) += h;
        minus.estimate(i)(r, c, 0) -= h;
        const double fd = (grounding_loss(plus, xi) - grounding_loss(minus, xi)) / (2 * h);
        const double an = grad[i](r, c, 0);
        worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(an)));
      }
  return {"grounding-gradient", worst < 1e-4, "max rel err " + detail::fmt(worst)};
}

inline std::vector<SuiteResult> run_verify_suites() {
  return {verify_consistency(), verify_noise_stats(), verify_pyramid(), verify_blend_fixed_point(),
          verify_grounding_gradient()};
}

}  // namespace zoomstack
