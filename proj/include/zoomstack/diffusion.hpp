#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"

namespace zoomstack {

enum class ScheduleKind { kCosine, kLinear };

/// Variance-preserving schedule: z_t = alpha_t x + sigma_t eps, t = 0..T,
/// alpha_t^2 + sigma_t^2 = 1.
class NoiseSchedule {
 public:
  // alpha-bar is mapped affinely onto [kAlphaBarMin, 1 - kSigmaMin^2] so that
  // alpha_0 ~ 1 while sigma_0 > 0 (the sampler evaluates eps at t = 0) and
  // alpha_T > 0. Monotonicity survives the map.
  static constexpr double kSigmaMin = 1e-3;
  static constexpr double kAlphaBarMin = 1e-4;

  static NoiseSchedule make(int steps, ScheduleKind kind = ScheduleKind::kCosine) {
    if (steps < 1) throw ValidationError("schedule needs T >= 1, got " + std::to_string(steps));
    std::vector<double> abar(steps + 1);
    if (kind == ScheduleKind::kCosine) {
      constexpr double s = 0.008;
      auto f = [](double u) {
        const double c = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
      };
      const double f0 = f(0.0);
      for (int t = 0; t <= steps; ++t) abar[t] = f(static_cast<double>(t) / steps) / f0;
    } else {
      // beta linear in t, rescaled so any T spans the same total corruption as
      // the usual 1e-4 .. 0.02 over 1000 steps.
      const double scale = 1000.0 / steps;
      const double b0 = 1e-4 * scale;
      const double b1 = 0.02 * scale;
      abar[0] = 1.0;
      for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 1.0 : static_cast<double>(t - 1) / (steps - 1);
        const double beta = std::min(b0 + (b1 - b0) * frac, 0.999);
        abar[t] = abar[t - 1] * (1.0 - beta);
      }
    }
    const double hi = 1.0 - kSigmaMin * kSigmaMin;
    NoiseSchedule sched;
    sched.alpha_.resize(steps + 1);
    sched.sigma_.resize(steps + 1);
    for (int t = 0; t <= steps; ++t) {
      const double ab = kAlphaBarMin + (hi - kAlphaBarMin) * abar[t];
      sched.alpha_[t] = std::sqrt(ab);
      sched.sigma_[t] = std::sqrt(1.0 - ab);
    }
    sched.validate();
    return sched;
  }

  int steps() const noexcept { return static_cast<int>(alpha_.size()) - 1; }
  double alpha(int t) const { return alpha_.at(check(t)); }
  double sigma(int t) const { return sigma_.at(check(t)); }
  double alpha_bar(int t) const { return alpha(t) * alpha(t); }

  int check(int t) const {
    if (t < 0 || t > steps())
      throw ValidationError("timestep " + std::to_string(t) + " out of range [0, " +
                            std::to_string(steps()) + "]");
    return t;
  }

  void validate() const {
    const int T = steps();
    if (alpha_[0] < 0.999 || sigma_[0] > 0.05 || sigma_[T] < 0.99)
      throw InvariantError("noise schedule endpoints out of range");
    for (int t = 0; t <= T; ++t) {
      if (std::abs(alpha_[t] * alpha_[t] + sigma_[t] * sigma_[t] - 1.0) > 1e-9)
        throw InvariantError("noise schedule not variance preserving at t=" + std::to_string(t));
      if (t > 0 && !(alpha_[t] < alpha_[t - 1]))
        throw InvariantError("alpha not strictly decreasing at t=" + std::to_string(t));
    }
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> sigma_;
};

inline NoiseSchedule make_schedule(int steps, ScheduleKind kind = ScheduleKind::kCosine) {
  return NoiseSchedule::make(steps, kind);
}

/// Classifier-free guidance: (1 + omega) eps_cond - omega eps_uncond.
inline Image cfg_combine(const Image& eps_cond, const Image& eps_uncond, double omega) {
  require_same_shape(eps_cond, eps_uncond, "cfg_combine");
  if (omega == 0.0) return eps_cond;
  return axpby(1.0 + omega, eps_cond, -omega, eps_uncond);
}

/// x_hat = (z - sigma_t eps_hat) / alpha_t, clamped to [-1, 1].
inline Image predict_clean_unclamped(const Image& z, const Image& eps_hat, int t,
                                     const NoiseSchedule& sched) {
  require_same_shape(z, eps_hat, "predict_clean");
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  return axpby(1.0 / a, z, -s / a, eps_hat);
}

inline Image predict_clean(const Image& z, const Image& eps_hat, int t, const NoiseSchedule& sched) {
  Image x = predict_clean_unclamped(z, eps_hat, t, sched);
  clamp_inplace(x);
  return x;
}

/// Coefficients of the ancestral step z_{t-1} = cx x_hat + cz z_t + noise_std eps.
struct PosteriorCoefficients {
  double cx;
  double cz;
  double noise_std;
};

inline PosteriorCoefficients posterior_coefficients(int t, const NoiseSchedule& sched) {
  if (t < 1) throw ValidationError("DDPM update needs t >= 1, got " + std::to_string(t));
  const double ab_t = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t - 1);
  const double beta = 1.0 - ab_t / ab_prev;
  PosteriorCoefficients c;
  c.cx = sched.alpha(t - 1) * beta / (1.0 - ab_t);
  c.cz = std::sqrt(ab_t / ab_prev) * (1.0 - ab_prev) / (1.0 - ab_t);
  c.noise_std = t == 1 ? 0.0 : std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab_t));
  return c;
}

/// Ancestral DDPM step in x0-parameterization; no noise is added at t = 1.
inline Image ddpm_update(const Image& z_t, const Image& x_hat, const Image& eps, int t,
                         const NoiseSchedule& sched) {
  require_same_shape(z_t, x_hat, "ddpm_update");
  require_same_shape(z_t, eps, "ddpm_update");
  const auto c = posterior_coefficients(t, sched);
  Image out(z_t.height(), z_t.width(), z_t.channels());
  auto o = out.values();
  auto zv = z_t.values();
  auto xv = x_hat.values();
  auto ev = eps.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = c.cx * xv[k] + c.cz * zv[k] + c.noise_std * ev[k];
  return out;
}

}  // namespace zoomstack
