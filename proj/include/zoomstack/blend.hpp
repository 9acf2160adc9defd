#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zoomstack/image.hpp"
#include "zoomstack/pyramid.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

/// Per-level clean-image estimates x_0 .. x_{N-1}, each seen at zoom p^i.
class ObservationSet {
 public:
  ObservationSet(ZoomSchedule schedule, std::vector<Image> estimates)
      : schedule_(schedule), estimates_(std::move(estimates)) {
    if (static_cast<int>(estimates_.size()) != schedule_.levels())
      throw ValidationError("observation count " + std::to_string(estimates_.size()) +
                            " != N=" + std::to_string(schedule_.levels()));
    for (const auto& e : estimates_) schedule_.check_image(e, "observation");
  }

  const ZoomSchedule& schedule() const noexcept { return schedule_; }
  int levels() const noexcept { return schedule_.levels(); }
  const Image& estimate(int i) const {
    schedule_.check_level(i);
    return estimates_[i];
  }
  Image& estimate(int i) {
    schedule_.check_level(i);
    return estimates_[i];
  }
  const std::vector<Image>& estimates() const noexcept { return estimates_; }

 private:
  ZoomSchedule schedule_;
  std::vector<Image> estimates_;
};

/// The renders Pi_image(L; i) for every level, as an observation set.
inline ObservationSet render_all(const ZoomStack& stack) {
  std::vector<Image> renders;
  for (int i = 0; i < stack.levels(); ++i) renders.push_back(render_image(stack, i));
  return ObservationSet(stack.schedule(), std::move(renders));
}

struct BlendOptions {
  int min_pyramid_size = 4;
};

/// Finest pyramid band that an observation `distance` levels further out can
/// populate: the smallest k with 2^k >= p^distance. Its crop has only
/// H / p^distance native pixels, so bands finer than that carry no signal.
inline int first_contributing_band(int p, int distance) {
  const std::int64_t scale = int_pow(p, distance);
  int k = 0;
  while ((std::int64_t{1} << k) < scale) ++k;
  return k;
}

/// Whether observation m feeds band k of layer i (k == band_count is the residual).
inline bool contributes(int p, int layer, int observation, int band) {
  return observation <= layer && band >= first_contributing_band(p, layer - observation);
}

/// Observation m's view of layer i: its central H/p^(i-m) crop, resized to H x W.
inline Image upscaled_crop(const ObservationSet& obs, int layer, int observation) {
  const auto& s = obs.schedule();
  const Image& x = obs.estimate(observation);
  if (observation == layer) return x;
  const auto f = s.zoom(layer - observation);
  Image crop = crop_center(x, static_cast<int>(s.height() / f), static_cast<int>(s.width() / f));
  return resize_bilinear(crop, s.height(), s.width());
}

/// Band-averaged pyramid for layer i: each Laplacian band is the mean over
/// the observations m <= i whose crops natively resolve it.
inline LaplacianPyramid blended_pyramid(const ObservationSet& obs, int layer, const BlendOptions& opt = {}) {
  const auto& s = obs.schedule();
  s.check_level(layer);
  const int p = s.p();
  std::vector<LaplacianPyramid> pyramids;
  pyramids.reserve(layer + 1);
  for (int m = 0; m <= layer; ++m)
    pyramids.push_back(build_laplacian(upscaled_crop(obs, layer, m), opt.min_pyramid_size));

  LaplacianPyramid out;
  const int depth = pyramids.front().band_count();
  auto average = [&](int band, auto&& pick) {
    Image acc;
    int count = 0;
    for (int m = 0; m <= layer; ++m) {
      if (!contributes(p, layer, m, band)) continue;
      const Image& b = pick(pyramids[m]);
      acc = count == 0 ? b : acc + b;
      ++count;
    }
    // m == layer contributes to every band, so count >= 1.
    return (1.0 / count) * acc;
  };
  for (int k = 0; k < depth; ++k)
    out.bands.push_back(average(k, [k](const LaplacianPyramid& py) -> const Image& { return py.bands[k]; }));
  out.residual = average(depth, [](const LaplacianPyramid& py) -> const Image& { return py.residual; });
  return out;
}

/// Multi-resolution blend for layer i. Layer 0 has a single contributor and
/// is returned as is.
inline Image blend_layer(const ObservationSet& obs, int layer, const BlendOptions& opt = {}) {
  obs.schedule().check_level(layer);
  if (layer == 0) return obs.estimate(0);
  return recompose(blended_pyramid(obs, layer, opt));
}

inline ZoomStack blend_stack(const ObservationSet& obs, const BlendOptions& opt = {}) {
  std::vector<Image> layers;
  layers.reserve(obs.levels());
  for (int i = 0; i < obs.levels(); ++i) layers.push_back(blend_layer(obs, i, opt));
  return ZoomStack(obs.schedule(), std::move(layers));
}

/// Baseline: layer i is the pixelwise mean of the upscaled crops of x_m, m <= i.
inline ZoomStack naive_blend(const ObservationSet& obs) {
  std::vector<Image> layers;
  layers.reserve(obs.levels());
  for (int i = 0; i < obs.levels(); ++i) {
    if (i == 0) {
      layers.push_back(obs.estimate(0));
      continue;
    }
    Image acc = upscaled_crop(obs, i, 0);
    for (int m = 1; m <= i; ++m) acc = acc + upscaled_crop(obs, i, m);
    layers.push_back((1.0 / (i + 1)) * acc);
  }
  return ZoomStack(obs.schedule(), std::move(layers));
}

}  // namespace zoomstack
