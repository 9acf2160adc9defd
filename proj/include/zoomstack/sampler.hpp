#pragma once

#include <chrono>
#include <cstdint>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoomstack/blend.hpp"
#include "zoomstack/denoiser.hpp"
#include "zoomstack/diffusion.hpp"
#include "zoomstack/grounding.hpp"
#include "zoomstack/rng.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

/// Where the per-step DDPM noise comes from.
enum class SamplerNoise {
  kSharedExact,  // Pi_noise with variance-exact downscale
  kSharedGainP,  // Pi_noise with the p-per-step rescale
  kIndependent,  // raw E_i per level, nothing shared
};

/// How the per-level estimates become the next stack.
enum class BlendMode {
  kMultiresolution,  // Laplacian band averaging
  kNaive,            // pixel averaging of overlapping crops
  kIterative,        // one level at a time, each writes its own layer
  kIndependent,      // no coupling at all: N separate DDPM chains
};

struct SamplerConfig {
  double omega = 7.5;
  int steps = 256;
  std::uint64_t seed = 0;
  SamplerNoise noise_mode = SamplerNoise::kSharedExact;
  BlendMode blend_mode = BlendMode::kMultiresolution;
  ScheduleKind schedule = ScheduleKind::kCosine;
  std::optional<GroundingConfig> grounding;
  BlendOptions blend;
  bool parallel_levels = true;

  NoiseSchedule noise_schedule() const { return make_schedule(steps, schedule); }

  void validate(const ZoomSchedule& s) const {
    if (steps < 1) throw ValidationError("sampler needs T >= 1");
    if (!(omega >= 0.0)) throw ValidationError("guidance weight omega must be >= 0");
    if (grounding) grounding->validate(s);
    // Fail before sampling rather than at the first blend.
    if (blend_mode == BlendMode::kMultiresolution && s.levels() > 1)
      (void)pyramid_depth(s.height(), s.width(), blend.min_pyramid_size);
  }
};

struct StepRecord {
  int t = 0;
  std::vector<ImageStats> levels;  // stats of the estimates fed to the blend
  std::optional<double> grounding_loss;
};

struct SamplingTrace {
  std::vector<StepRecord> steps;
  double wall_seconds = 0.0;
};

struct SamplingResult {
  ZoomStack stack;
  SamplingTrace trace;
};

/// One JSON object per step: {"t", "levels": [{"min","max","mean"}...], "grounding_loss"?}.
inline void write_trace(std::ostream& os, const SamplingTrace& trace) {
  for (const auto& rec : trace.steps) {
    nlohmann::json j;
    j["t"] = rec.t;
    j["levels"] = nlohmann::json::array();
    for (const auto& st : rec.levels) j["levels"].push_back({{"min", st.min}, {"max", st.max}, {"mean", st.mean}});
    if (rec.grounding_loss) j["grounding_loss"] = *rec.grounding_loss;
    os << j.dump() << '\n';
  }
}

namespace detail {

struct StepContext {
  const ZoomSchedule& schedule;
  const std::vector<std::string>& prompts;
  const Denoiser& denoiser;
  const SamplerConfig& config;
  const NoiseSchedule& noise_schedule;
};

// Guided eps prediction at timestep t and the implied clean image.
inline Image estimate_clean(const StepContext& ctx, const Image& z, int t, int level) {
  Image eps_hat;
  try {
    const Image cond = checked_prediction(ctx.denoiser, z, t, level, {ctx.prompts[level], true});
    if (ctx.config.omega == 0.0) {
      eps_hat = cond;
    } else {
      const Image uncond = checked_prediction(ctx.denoiser, z, t, level, Conditioning::unconditional());
      eps_hat = cfg_combine(cond, uncond, ctx.config.omega);
    }
  } catch (const BackendError& e) {
    throw BackendError("denoiser failed at t=" + std::to_string(t) + ", level " + std::to_string(level) +
                       ": " + e.what());
  }
  Image x = predict_clean(z, eps_hat, t, ctx.noise_schedule);
  if (!all_finite(x))
    throw InvariantError("non-finite clean-image estimate at t=" + std::to_string(t) + ", level " +
                         std::to_string(level));
  return x;
}

inline Image initial_latent(const ZoomSchedule& s, std::uint64_t seed, int level, int steps) {
  return standard_normal(s.height(), s.width(), s.channels(), level_seed(seed, level),
                         static_cast<std::uint32_t>(steps), Purpose::kInitialLatent);
}

inline Image step_noise(const NoiseStack& e, int level, SamplerNoise mode, bool coupled) {
  if (!coupled || mode == SamplerNoise::kIndependent) return e.layer(level);
  return render_noise(e, level, mode == SamplerNoise::kSharedExact ? NoiseMode::kExact : NoiseMode::kGainP);
}

inline StepRecord make_record(int t, const ObservationSet& obs) {
  StepRecord rec;
  rec.t = t;
  for (const auto& x : obs.estimates()) rec.levels.push_back(stats(x));
  return rec;
}

inline void check_inputs(const ZoomSchedule& s, const std::vector<std::string>& prompts,
                         const SamplerConfig& config) {
  config.validate(s);
  if (static_cast<int>(prompts.size()) != s.levels())
    throw ValidationError("got " + std::to_string(prompts.size()) + " prompts for N=" +
                          std::to_string(s.levels()) + " levels");
}

}  // namespace detail

/// Multi-scale joint sampling. For t = T..1 every level renders its image
/// and noise from the shared stack, takes one DDPM step, and re-estimates its
/// clean image at t-1; the estimates are optionally grounded, then blended
/// into the next stack. Deterministic in (inputs, config.seed).
///
/// blend_mode kIterative is dispatched to sample_iterative().
inline SamplingResult sample_iterative(const ZoomSchedule& s, const std::vector<std::string>& prompts,
                                       const Denoiser& denoiser, const SamplerConfig& config);

inline SamplingResult joint_sample(const ZoomSchedule& s, const std::vector<std::string>& prompts,
                                   const Denoiser& denoiser, const SamplerConfig& config) {
  if (config.blend_mode == BlendMode::kIterative) return sample_iterative(s, prompts, denoiser, config);
  detail::check_inputs(s, prompts, config);
  const auto started = std::chrono::steady_clock::now();
  const NoiseSchedule sched = config.noise_schedule();
  const detail::StepContext ctx{s, prompts, denoiser, config, sched};
  const bool coupled = config.blend_mode != BlendMode::kIndependent;
  const int n = s.levels();

  ZoomStack stack(s);
  std::vector<Image> z;
  for (int i = 0; i < n; ++i) z.push_back(detail::initial_latent(s, config.seed, i, config.steps));

  SamplingTrace trace;
  for (int t = config.steps; t >= 1; --t) {
    const NoiseStack noise = sample_noise_stack(s, config.seed, static_cast<std::uint32_t>(t));
    auto level_step = [&](int i) {
      const Image x = coupled ? render_image(stack, i) : stack.layer(i);
      const Image eps = detail::step_noise(noise, i, config.noise_mode, coupled);
      z[i] = ddpm_update(z[i], x, eps, t, sched);
      return detail::estimate_clean(ctx, z[i], t - 1, i);
    };

    std::vector<Image> estimates(n);
    if (config.parallel_levels && n > 1) {
      std::vector<std::future<Image>> jobs;
      for (int i = 0; i < n; ++i) jobs.push_back(std::async(std::launch::async, level_step, i));
      for (int i = 0; i < n; ++i) estimates[i] = jobs[i].get();
    } else {
      for (int i = 0; i < n; ++i) estimates[i] = level_step(i);
    }

    ObservationSet obs(s, std::move(estimates));
    std::optional<double> gloss;
    if (config.grounding) {
      AdamState adam;  // fresh moments every sampling step
      obs = apply_grounding(obs, *config.grounding, adam);
      gloss = grounding_loss(obs, config.grounding->target);
    }
    auto rec = detail::make_record(t, obs);
    rec.grounding_loss = gloss;
    trace.steps.push_back(std::move(rec));

    switch (config.blend_mode) {
      case BlendMode::kMultiresolution:
        stack = blend_stack(obs, config.blend);
        break;
      case BlendMode::kNaive:
        stack = naive_blend(obs);
        break;
      case BlendMode::kIndependent:
        stack = ZoomStack(s, obs.estimates());
        break;
      case BlendMode::kIterative:
        break;  // handled above
    }
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(stack), std::move(trace)};
}

/// Ablation: cycle through the levels one at a time. Each level renders from
/// the current stack, takes its step, and writes its estimate straight into
/// its own layer before the next level runs. There is no joint blend.
inline SamplingResult sample_iterative(const ZoomSchedule& s, const std::vector<std::string>& prompts,
                                       const Denoiser& denoiser, const SamplerConfig& config) {
  detail::check_inputs(s, prompts, config);
  const auto started = std::chrono::steady_clock::now();
  const NoiseSchedule sched = config.noise_schedule();
  const detail::StepContext ctx{s, prompts, denoiser, config, sched};
  const int n = s.levels();

  ZoomStack stack(s);
  std::vector<Image> z;
  for (int i = 0; i < n; ++i) z.push_back(detail::initial_latent(s, config.seed, i, config.steps));

  SamplingTrace trace;
  for (int t = config.steps; t >= 1; --t) {
    const NoiseStack noise = sample_noise_stack(s, config.seed, static_cast<std::uint32_t>(t));
    std::vector<Image> estimates(n, s.blank());
    for (int i = 0; i < n; ++i) {
      const Image x = render_image(stack, i);
      const Image eps = detail::step_noise(noise, i, config.noise_mode, true);
      z[i] = ddpm_update(z[i], x, eps, t, sched);
      estimates[i] = detail::estimate_clean(ctx, z[i], t - 1, i);
      if (config.grounding) {
        AdamState adam;
        ObservationSet single(s, estimates);
        single = apply_grounding(single, *config.grounding, adam, nullptr, i);
        estimates[i] = single.estimate(i);
      }
      stack.set_layer(i, estimates[i]);
    }
    ObservationSet obs(s, std::move(estimates));
    auto rec = detail::make_record(t, obs);
    if (config.grounding) rec.grounding_loss = grounding_loss(obs, config.grounding->target);
    trace.steps.push_back(std::move(rec));
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(stack), std::move(trace)};
}

}  // namespace zoomstack
