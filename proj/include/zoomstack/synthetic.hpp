#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "zoomstack/rng.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

/// A smooth procedural scene sampled at every zoom level.
///
/// The scene is a sum of a few low-frequency plane waves over the unit square
/// (per channel); layer j samples the central 1/p^j of it. Values stay in
/// [-0.8, 0.8]. Used as an oracle target and for test fixtures.
inline ZoomStack smooth_scene_stack(const ZoomSchedule& s, std::uint64_t seed, int waves = 4) {
  Image params(waves, 4, s.channels());
  fill_uniform(params, seed, 0, Purpose::kTest, 0.0, 1.0);
  const double amp = 0.8 / waves;
  std::vector<Image> layers;
  for (int j = 0; j < s.levels(); ++j) {
    const double scale = 1.0 / static_cast<double>(s.zoom(j));
    Image x(s.height(), s.width(), s.channels());
    for (int r = 0; r < s.height(); ++r)
      for (int c = 0; c < s.width(); ++c) {
        const double u = ((r + 0.5) / s.height() - 0.5) * scale;
        const double v = ((c + 0.5) / s.width() - 0.5) * scale;
        for (int ch = 0; ch < s.channels(); ++ch) {
          double acc = 0.0;
          for (int k = 0; k < waves; ++k) {
            const double fu = 0.5 + 2.5 * params(k, 0, ch);
            const double fv = 0.5 + 2.5 * params(k, 1, ch);
            const double sign = params(k, 3, ch) < 0.5 ? -1.0 : 1.0;
            const double phase = 2.0 * std::numbers::pi * params(k, 2, ch);
            acc += amp * std::sin(2.0 * std::numbers::pi * (fu * u + sign * fv * v) + phase);
          }
          x(r, c, ch) = acc;
        }
      }
    layers.push_back(std::move(x));
  }
  return ZoomStack(s, std::move(layers));
}

}  // namespace zoomstack
