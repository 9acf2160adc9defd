#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "zoomstack/diffusion.hpp"
#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"

namespace zoomstack {

/// Conditioning for one query. The unconditional branch is an empty prompt
/// with `conditional == false`.
struct Conditioning {
  std::string prompt;
  bool conditional = true;

  static Conditioning unconditional() { return {"", false}; }
};

/// eps_theta(z_t; t, y): predicts the noise in z_t. Implementations must be
/// safe to call concurrently; the sampler issues all levels of a step at once.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// `level` identifies the zoom level the query belongs to.
  virtual Image predict_noise(const Image& z, int t, int level, const Conditioning& cond) const = 0;
};

/// Checks shape and finiteness of a backend's answer.
inline Image checked_prediction(const Denoiser& d, const Image& z, int t, int level,
                                const Conditioning& cond) {
  Image eps = d.predict_noise(z, t, level, cond);
  if (!eps.same_shape(z))
    throw BackendError("denoiser returned shape " + eps.shape_string() + " for input " + z.shape_string());
  if (!all_finite(eps)) throw BackendError("denoiser returned non-finite values");
  return eps;
}

/// Knows the clean image of every level and returns exactly the noise that
/// predict_clean inverts back to it.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(std::vector<Image> targets, NoiseSchedule schedule)
      : targets_(std::move(targets)), schedule_(std::move(schedule)) {}

  Image predict_noise(const Image& z, int t, int level, const Conditioning&) const override {
    if (level < 0 || level >= static_cast<int>(targets_.size()))
      throw BackendError("oracle denoiser has no target for level " + std::to_string(level));
    const Image& x = targets_[level];
    require_same_shape(z, x, "oracle denoiser");
    const double a = schedule_.alpha(t);
    const double s = schedule_.sigma(t);
    return axpby(1.0 / s, z, -a / s, x);
  }

 private:
  std::vector<Image> targets_;
  NoiseSchedule schedule_;
};

/// Exact denoiser for data x ~ N(mu, s^2 I): uses the posterior mean
/// E[x | z_t] = (alpha s^2 z + sigma^2 mu) / (alpha^2 s^2 + sigma^2).
class GaussianDenoiser final : public Denoiser {
 public:
  GaussianDenoiser(Image mean, double std_dev, NoiseSchedule schedule)
      : mean_(std::move(mean)), std_(std_dev), schedule_(std::move(schedule)) {
    if (!(std_dev > 0.0)) throw ValidationError("Gaussian denoiser needs s > 0");
  }

  Image posterior_mean(const Image& z, int t) const {
    require_same_shape(z, mean_, "gaussian denoiser");
    const double a = schedule_.alpha(t);
    const double sg = schedule_.sigma(t);
    const double s2 = std_ * std_;
    const double denom = a * a * s2 + sg * sg;
    return axpby(a * s2 / denom, z, sg * sg / denom, mean_);
  }

  Image predict_noise(const Image& z, int t, int, const Conditioning&) const override {
    const double a = schedule_.alpha(t);
    const double sg = schedule_.sigma(t);
    return axpby(1.0 / sg, z, -a / sg, posterior_mean(z, t));
  }

 private:
  Image mean_;
  double std_;
  NoiseSchedule schedule_;
};

/// Returns z unchanged. Used for transport loopback tests.
class EchoDenoiser final : public Denoiser {
 public:
  Image predict_noise(const Image& z, int, int, const Conditioning&) const override { return z; }
};

}  // namespace zoomstack
