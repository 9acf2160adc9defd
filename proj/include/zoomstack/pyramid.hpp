#pragma once

#include <array>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"

namespace zoomstack {

/// Burt-Adelson Laplacian pyramid. bands[k] is (H/2^k) x (W/2^k); the
/// residual is the Gaussian level G_K at (H/2^K) x (W/2^K).
struct LaplacianPyramid {
  std::vector<Image> bands;
  Image residual;

  int band_count() const noexcept { return static_cast<int>(bands.size()); }
};

namespace detail {

inline constexpr std::array<double, 5> kBinomial5 = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};

// Reflect-101 index into [0, n).
inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

inline bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace detail

/// Blur with the 5-tap binomial kernel and keep even rows/columns.
inline Image pyramid_reduce(const Image& x) {
  using detail::kBinomial5;
  using detail::reflect101;
  if (x.height() % 2 != 0 || x.width() % 2 != 0)
    throw DimensionError("pyramid reduce needs even dimensions, got " + x.shape_string());
  const int h = x.height(), w = x.width(), nc = x.channels();
  // Horizontal pass on every row, only at even output columns.
  Image tmp(h, w / 2, nc);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w / 2; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) acc += kBinomial5[k + 2] * x(r, reflect101(2 * c + k, w), ch);
        tmp(r, c, ch) = acc;
      }
  Image out(h / 2, w / 2, nc);
  for (int r = 0; r < h / 2; ++r)
    for (int c = 0; c < w / 2; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) acc += kBinomial5[k + 2] * tmp(reflect101(2 * r + k, h), c, ch);
        out(r, c, ch) = acc;
      }
  return out;
}

/// Zero-insert upsample to (2h, 2w) and interpolate with 2x the binomial kernel.
inline Image pyramid_expand(const Image& x) {
  using detail::kBinomial5;
  using detail::reflect101;
  const int h = x.height(), w = x.width(), nc = x.channels();
  const int H = 2 * h, W = 2 * w;
  // Only even positions of the upsampled grid are nonzero; the reflected index
  // decides whether a tap lands on a sample.
  Image tmp(h, W, nc);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          const int src = reflect101(c + k, W);
          if (src % 2 == 0) acc += 2.0 * kBinomial5[k + 2] * x(r, src / 2, ch);
        }
        tmp(r, c, ch) = acc;
      }
  Image out(H, W, nc);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          const int src = reflect101(r + k, H);
          if (src % 2 == 0) acc += 2.0 * kBinomial5[k + 2] * tmp(src / 2, c, ch);
        }
        out(r, c, ch) = acc;
      }
  return out;
}

/// Number of difference bands for an h x w image stopped at `min_size`.
inline int pyramid_depth(int h, int w, int min_size = 4) {
  if (!detail::is_pow2(h) || !detail::is_pow2(w))
    throw DimensionError("Laplacian pyramid needs power-of-two sizes, got " + std::to_string(h) +
                         "x" + std::to_string(w));
  if (min_size < 1 || std::min(h, w) < min_size)
    throw DimensionError("image smaller than the minimum pyramid size " + std::to_string(min_size));
  int depth = 0;
  for (int s = std::min(h, w); s > min_size; s /= 2) ++depth;
  return depth;
}

inline LaplacianPyramid build_laplacian(const Image& x, int min_size = 4) {
  const int depth = pyramid_depth(x.height(), x.width(), min_size);
  LaplacianPyramid pyr;
  pyr.bands.reserve(depth);
  Image g = x;
  for (int k = 0; k < depth; ++k) {
    Image next = pyramid_reduce(g);
    pyr.bands.push_back(g - pyramid_expand(next));
    g = std::move(next);
  }
  pyr.residual = std::move(g);
  return pyr;
}

inline Image recompose(const LaplacianPyramid& pyr) {
  Image x = pyr.residual;
  for (int k = pyr.band_count() - 1; k >= 0; --k) {
    const Image& band = pyr.bands[k];
    if (band.height() != 2 * x.height() || band.width() != 2 * x.width() ||
        band.channels() != x.channels())
      throw DimensionError("pyramid band " + std::to_string(k) + " has shape " + band.shape_string() +
                           ", expected twice " + x.shape_string());
    x = pyramid_expand(x) + band;
  }
  return x;
}

}  // namespace zoomstack
