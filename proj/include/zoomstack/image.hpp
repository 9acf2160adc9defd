#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"

namespace zoomstack {

/// Dense H x W x C image, row-major with interleaved channels.
///
/// Pixel values are nominally in [-1, 1] but the type does not enforce it;
/// intermediate quantities (noise, gradients, pyramid bands) are unbounded.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : h_(height), w_(width), c_(channels) {
    if (height < 0 || width < 0 || channels < 0)
      throw DimensionError("negative image dimension");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int r, int c, int ch) noexcept { return data_[index(r, c, ch)]; }
  double operator()(int r, int c, int ch) const noexcept { return data_[index(r, c, ch)]; }

  std::span<double> values() & noexcept { return data_; }
  std::span<const double> values() const& noexcept { return data_; }
  // A span into a temporary would dangle.
  std::span<const double> values() const&& = delete;

  bool same_shape(const Image& o) const noexcept {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  std::string shape_string() const {
    return std::to_string(h_) + "x" + std::to_string(w_) + "x" + std::to_string(c_);
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int r, int c, int ch) const noexcept {
    return (static_cast<std::size_t>(r) * w_ + c) * c_ + ch;
  }

  int h_ = 0;
  int w_ = 0;
  int c_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_string() +
                         " vs " + b.shape_string());
}

inline bool all_finite(const Image& x) {
  return std::all_of(x.values().begin(), x.values().end(),
                     [](double v) { return std::isfinite(v); });
}

inline void require_finite(const Image& x, const char* what) {
  if (!all_finite(x)) throw ValidationError(std::string(what) + ": non-finite pixel value");
}

// Elementwise helpers. All of them check shapes.

inline Image operator+(const Image& a, const Image& b) {
  require_same_shape(a, b, "add");
  Image out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += bv[k];
  return out;
}

inline Image operator-(const Image& a, const Image& b) {
  require_same_shape(a, b, "subtract");
  Image out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] -= bv[k];
  return out;
}

inline Image operator*(double s, const Image& a) {
  Image out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

/// a * x + b * y
inline Image axpby(double a, const Image& x, double b, const Image& y) {
  require_same_shape(x, y, "axpby");
  Image out(x.height(), x.width(), x.channels());
  auto o = out.values();
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = a * xv[k] + b * yv[k];
  return out;
}

inline void clamp_inplace(Image& x, double lo = -1.0, double hi = 1.0) {
  for (double& v : x.values()) v = std::clamp(v, lo, hi);
}

inline double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return s;
}

inline double squared_norm(const Image& a) { return dot(a, a); }

inline double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) m = std::max(m, std::abs(av[k] - bv[k]));
  return m;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean_abs_diff");
  if (a.empty()) return 0.0;
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) s += std::abs(av[k] - bv[k]);
  return s / static_cast<double>(av.size());
}

/// PSNR in dB for images on [-1, 1] (peak-to-peak range 2).
inline double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double mse = squared_norm(a - b) / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(4.0 / mse);
}

struct ImageStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

inline ImageStats stats(const Image& x) {
  ImageStats s;
  if (x.empty()) return s;
  auto v = x.values();
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  double sum = 0.0;
  for (double e : v) sum += e;
  s.mean = sum / static_cast<double>(v.size());
  return s;
}

/// Central h x w region of x.
inline Image crop_center(const Image& x, int h, int w) {
  if (h > x.height() || w > x.width() || h < 0 || w < 0)
    throw DimensionError("crop " + std::to_string(h) + "x" + std::to_string(w) +
                         " larger than image " + x.shape_string());
  if ((x.height() - h) % 2 != 0 || (x.width() - w) % 2 != 0)
    throw DimensionError("crop cannot be centered: " + std::to_string(h) + "x" +
                         std::to_string(w) + " in " + x.shape_string());
  const int r0 = (x.height() - h) / 2;
  const int c0 = (x.width() - w) / 2;
  Image out(h, w, x.channels());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < x.channels(); ++ch) out(r, c, ch) = x(r0 + r, c0 + c, ch);
  return out;
}

/// Places x at the center of an h x w zero canvas.
inline Image pad_center(const Image& x, int h, int w) {
  if (h < x.height() || w < x.width())
    throw DimensionError("pad target smaller than image " + x.shape_string());
  if ((h - x.height()) % 2 != 0 || (w - x.width()) % 2 != 0)
    throw DimensionError("padding cannot be centered: " + x.shape_string() + " in " +
                         std::to_string(h) + "x" + std::to_string(w));
  const int r0 = (h - x.height()) / 2;
  const int c0 = (w - x.width()) / 2;
  Image out(h, w, x.channels());
  for (int r = 0; r < x.height(); ++r)
    for (int c = 0; c < x.width(); ++c)
      for (int ch = 0; ch < x.channels(); ++ch) out(r0 + r, c0 + c, ch) = x(r, c, ch);
  return out;
}

/// Bilinear resize with pixel-center alignment and clamped borders.
inline Image resize_bilinear(const Image& x, int h, int w) {
  if (x.empty() || h <= 0 || w <= 0) throw DimensionError("resize of empty image");
  if (x.height() == h && x.width() == w) return x;
  const double sy = static_cast<double>(x.height()) / h;
  const double sx = static_cast<double>(x.width()) / w;
  Image out(h, w, x.channels());
  for (int r = 0; r < h; ++r) {
    double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, x.height() - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, x.height() - 1);
    double ty = fy - y0;
    for (int c = 0; c < w; ++c) {
      double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, x.width() - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, x.width() - 1);
      double tx = fx - x0;
      for (int ch = 0; ch < x.channels(); ++ch) {
        double top = (1 - tx) * x(y0, x0, ch) + tx * x(y0, x1, ch);
        double bot = (1 - tx) * x(y1, x0, ch) + tx * x(y1, x1, ch);
        out(r, c, ch) = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

}  // namespace zoomstack
