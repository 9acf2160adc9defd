#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"
#include "zoomstack/rng.hpp"

namespace zoomstack {

/// How a downscale step rescales its output.
enum class DownscaleMode {
  kImage,       // prefilter sums to 1; preserves DC
  kNoiseExact,  // scaled by 1/sqrt(sum w^2); keeps unit variance for any kernel
  kNoiseGainP,  // scaled by p per step; unit variance only for a box kernel
};

enum class NoiseMode { kExact, kGainP };

constexpr DownscaleMode downscale_mode(NoiseMode m) noexcept {
  return m == NoiseMode::kExact ? DownscaleMode::kNoiseExact : DownscaleMode::kNoiseGainP;
}

inline std::int64_t int_pow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

/// Geometry shared by every level of a zoom stack: level i shows the scene at
/// magnification p^i, all levels are H x W x C.
///
/// Every level-k crop (H/p^k x W/p^k) must be integral and centered, and for
/// rendering to be exactly consistent the p x p prefilter blocks of one level
/// must align with the crop offsets of the next. For odd p this only needs
/// p^(N-1) | H; for even p it needs 2 p^(N-1) | H (when N >= 2). Same for W.
class ZoomSchedule {
 public:
  ZoomSchedule(int p, int levels, int height, int width, int channels)
      : p_(p), n_(levels), h_(height), w_(width), c_(channels) {
    if (p < 2) throw ValidationError("zoom base p must be >= 2, got " + std::to_string(p));
    if (levels < 1) throw ValidationError("level count N must be >= 1");
    if (channels < 1) throw ValidationError("channel count must be >= 1");
    if (height < 1 || width < 1) throw DimensionError("layer size must be positive");
    if (levels > 1) {
      std::int64_t required = int_pow(p, levels - 1);
      if (p % 2 == 0) required *= 2;
      if (height % required != 0 || width % required != 0)
        throw DimensionError("layer size " + std::to_string(height) + "x" + std::to_string(width) +
                             " must be divisible by " + std::to_string(required) +
                             " for p=" + std::to_string(p) + ", N=" + std::to_string(levels));
    }
  }

  int p() const noexcept { return p_; }
  int levels() const noexcept { return n_; }
  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int channels() const noexcept { return c_; }

  /// Magnification p^i of level i.
  std::int64_t zoom(int level) const { return int_pow(p_, level); }

  void check_level(int level) const {
    if (level < 0 || level >= n_)
      throw ValidationError("level " + std::to_string(level) + " out of range [0, " +
                            std::to_string(n_ - 1) + "]");
  }

  void check_image(const Image& x, const char* what) const {
    if (x.height() != h_ || x.width() != w_ || x.channels() != c_)
      throw DimensionError(std::string(what) + ": expected " + std::to_string(h_) + "x" +
                           std::to_string(w_) + "x" + std::to_string(c_) + ", got " +
                           x.shape_string());
  }

  Image blank() const { return Image(h_, w_, c_); }

  bool operator==(const ZoomSchedule&) const = default;

 private:
  int p_;
  int n_;
  int h_;
  int w_;
  int c_;
};

/// N same-shape layers L_0 .. L_{N-1}; layer i holds the pixels of zoom p^i.
/// Also used for noise stacks E_0 .. E_{N-1}.
class ZoomStack {
 public:
  explicit ZoomStack(ZoomSchedule schedule) : schedule_(schedule) {
    layers_.assign(schedule.levels(), schedule.blank());
  }

  ZoomStack(ZoomSchedule schedule, std::vector<Image> layers)
      : schedule_(schedule), layers_(std::move(layers)) {
    if (static_cast<int>(layers_.size()) != schedule_.levels())
      throw ValidationError("stack has " + std::to_string(layers_.size()) + " layers, schedule N=" +
                            std::to_string(schedule_.levels()));
    for (const auto& l : layers_) {
      schedule_.check_image(l, "stack layer");
      require_finite(l, "stack layer");
    }
  }

  const ZoomSchedule& schedule() const noexcept { return schedule_; }
  int levels() const noexcept { return schedule_.levels(); }
  const Image& layer(int i) const {
    schedule_.check_level(i);
    return layers_[i];
  }
  const std::vector<Image>& layers() const noexcept { return layers_; }

  void set_layer(int i, Image x) {
    schedule_.check_level(i);
    schedule_.check_image(x, "stack layer");
    layers_[i] = std::move(x);
  }

  bool operator==(const ZoomStack&) const = default;

 private:
  ZoomSchedule schedule_;
  std::vector<Image> layers_;
};

using NoiseStack = ZoomStack;

/// Fresh i.i.d. unit-Gaussian noise stack. Layer j is drawn from level j's stream.
inline NoiseStack sample_noise_stack(const ZoomSchedule& s, std::uint64_t run_seed,
                                     std::uint32_t step) {
  std::vector<Image> layers;
  layers.reserve(s.levels());
  for (int j = 0; j < s.levels(); ++j)
    layers.push_back(standard_normal(s.height(), s.width(), s.channels(), level_seed(run_seed, j),
                                     step, Purpose::kStepNoise));
  return NoiseStack(s, std::move(layers));
}

// ---------------------------------------------------------------------------
// Prefiltered downscale

/// Separable 1-D factor of the p x p truncated Gaussian (sigma = p/2), sum 1.
inline std::vector<double> prefilter_taps(int p) {
  if (p < 2) throw ValidationError("prefilter needs p >= 2");
  std::vector<double> taps(p);
  const double center = (p - 1) / 2.0;
  const double sigma = p / 2.0;
  double sum = 0.0;
  for (int u = 0; u < p; ++u) {
    const double d = u - center;
    taps[u] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[u];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

/// Output scale applied on top of the sum-1 prefilter for the given mode.
inline double downscale_gain(int p, DownscaleMode mode) {
  switch (mode) {
    case DownscaleMode::kImage:
      return 1.0;
    case DownscaleMode::kNoiseGainP:
      return static_cast<double>(p);
    case DownscaleMode::kNoiseExact: {
      double s1 = 0.0;
      for (double t : prefilter_taps(p)) s1 += t * t;
      return 1.0 / s1;  // 1/sqrt(sum of 2-D w^2) = 1/sum(1-D w^2)
    }
  }
  return 1.0;
}

/// One factor-p step: p x p truncated-Gaussian prefilter on non-overlapping
/// blocks, stride p. Returns the (H/p) x (W/p) content only.
inline Image downscale_once(const Image& x, int p, DownscaleMode mode = DownscaleMode::kImage) {
  if (p < 2) throw ValidationError("downscale factor must be >= 2");
  if (x.height() % p != 0 || x.width() % p != 0)
    throw DimensionError("image " + x.shape_string() + " not divisible by p=" + std::to_string(p));
  require_finite(x, "downscale_once");
  const auto taps = prefilter_taps(p);
  const double gain = downscale_gain(p, mode);
  Image out(x.height() / p, x.width() / p, x.channels());
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      for (int ch = 0; ch < x.channels(); ++ch) {
        double acc = 0.0;
        for (int a = 0; a < p; ++a) {
          double row = 0.0;
          for (int b = 0; b < p; ++b) row += taps[b] * x(r * p + a, c * p + b, ch);
          acc += taps[a] * row;
        }
        out(r, c, ch) = gain * acc;
      }
  return out;
}

/// Adjoint of downscale_once: spreads each input pixel over its p x p block.
inline Image downscale_once_adjoint(const Image& y, int p, DownscaleMode mode = DownscaleMode::kImage) {
  const auto taps = prefilter_taps(p);
  const double gain = downscale_gain(p, mode);
  Image out(y.height() * p, y.width() * p, y.channels());
  for (int r = 0; r < y.height(); ++r)
    for (int c = 0; c < y.width(); ++c)
      for (int ch = 0; ch < y.channels(); ++ch) {
        const double v = gain * y(r, c, ch);
        for (int a = 0; a < p; ++a)
          for (int b = 0; b < p; ++b) out(r * p + a, c * p + b, ch) = taps[a] * taps[b] * v;
      }
  return out;
}

/// k cascaded factor-p steps, content only ((H/p^k) x (W/p^k)).
inline Image downscale_content(const Image& x, int p, int k, DownscaleMode mode = DownscaleMode::kImage) {
  if (k < 0) throw ValidationError("downscale level must be >= 0, got " + std::to_string(k));
  Image out = x;
  for (int step = 0; step < k; ++step) out = downscale_once(out, p, mode);
  return out;
}

/// D_k: k cascaded factor-p steps, zero-padded back to the input size. D_0 is
/// the identity.
inline Image downscale(const Image& x, int p, int k, DownscaleMode mode = DownscaleMode::kImage) {
  if (k == 0) return x;
  return pad_center(downscale_content(x, p, k, mode), x.height(), x.width());
}

/// D_k^T: crop the center, then k adjoint steps.
inline Image downscale_adjoint(const Image& v, int p, int k, DownscaleMode mode = DownscaleMode::kImage) {
  if (k < 0) throw ValidationError("downscale level must be >= 0, got " + std::to_string(k));
  if (k == 0) return v;
  const std::int64_t f = int_pow(p, k);
  if (v.height() % f != 0 || v.width() % f != 0)
    throw DimensionError("image " + v.shape_string() + " not divisible by p^k");
  Image out = crop_center(v, static_cast<int>(v.height() / f), static_cast<int>(v.width() / f));
  for (int step = 0; step < k; ++step) out = downscale_once_adjoint(out, p, mode);
  return out;
}

// ---------------------------------------------------------------------------
// Center masks

/// M_k: ones on the central H/p^k x W/p^k rectangle.
class CenterMask {
 public:
  CenterMask(const ZoomSchedule& s, int k) : offset_(k) {
    s.check_level(k);
    const auto f = s.zoom(k);
    inner_h_ = static_cast<int>(s.height() / f);
    inner_w_ = static_cast<int>(s.width() / f);
    mask_ = Image(s.height(), s.width(), 1);
    const int r0 = (s.height() - inner_h_) / 2;
    const int c0 = (s.width() - inner_w_) / 2;
    for (int r = 0; r < inner_h_; ++r)
      for (int c = 0; c < inner_w_; ++c) mask_(r0 + r, c0 + c, 0) = 1.0;
  }

  int level_offset() const noexcept { return offset_; }
  int inner_height() const noexcept { return inner_h_; }
  int inner_width() const noexcept { return inner_w_; }
  const Image& image() const noexcept { return mask_; }
  bool inside(int r, int c) const noexcept { return mask_(r, c, 0) != 0.0; }

  /// mask * a + (1 - mask) * b
  Image select(const Image& a, const Image& b) const {
    require_same_shape(a, b, "mask select");
    Image out = b;
    for (int r = 0; r < out.height(); ++r)
      for (int c = 0; c < out.width(); ++c)
        if (inside(r, c))
          for (int ch = 0; ch < out.channels(); ++ch) out(r, c, ch) = a(r, c, ch);
    return out;
  }

  /// mask * a
  Image apply(const Image& a) const { return select(a, Image(a.height(), a.width(), a.channels())); }

 private:
  int offset_;
  int inner_h_ = 0;
  int inner_w_ = 0;
  Image mask_;
};

inline CenterMask center_mask(const ZoomSchedule& s, int k) { return CenterMask(s, k); }

// ---------------------------------------------------------------------------
// Rendering

/// Image seen at zoom level i: start from L_i and overlay D_{j-i}(L_j) inside
/// M_{j-i}, for j = i+1 .. N-1 in increasing order.
inline Image render_image(const ZoomStack& stack, int i) {
  const auto& s = stack.schedule();
  s.check_level(i);
  Image x = stack.layer(i);
  for (int j = i + 1; j < s.levels(); ++j) {
    const CenterMask mask(s, j - i);
    x = mask.select(downscale(stack.layer(j), s.p(), j - i), x);
  }
  return x;
}

/// Zoom-consistent noise at level i. Each downscale step is variance-corrected
/// according to `mode`, so the result stays unit Gaussian.
inline Image render_noise(const NoiseStack& noise, int i, NoiseMode mode = NoiseMode::kExact) {
  const auto& s = noise.schedule();
  s.check_level(i);
  Image eps = noise.layer(i);
  for (int j = i + 1; j < s.levels(); ++j) {
    const CenterMask mask(s, j - i);
    eps = mask.select(downscale(noise.layer(j), s.p(), j - i, downscale_mode(mode)), eps);
  }
  return eps;
}

/// Largest deviation between the central H/p x W/p of render(i) and the
/// downscaled render(i+1), over all levels. Zero up to rounding for any stack.
inline double consistency_error(const ZoomStack& stack) {
  const auto& s = stack.schedule();
  double worst = 0.0;
  Image finer = render_image(stack, s.levels() - 1);
  for (int i = s.levels() - 2; i >= 0; --i) {
    Image coarser = render_image(stack, i);
    Image center = crop_center(coarser, s.height() / s.p(), s.width() / s.p());
    worst = std::max(worst, max_abs_diff(center, downscale_once(finer, s.p())));
    finer = std::move(coarser);
  }
  return worst;
}

}  // namespace zoomstack
