// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures (capped at 1).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "zoomstack.hpp"

using namespace zoomstack;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok;
  std::string detail;
};

int failures = 0;

void report(const char* name, double budget_s, const std::function<Outcome()>& check) {
  const auto start = Clock::now();
  Outcome r;
  try {
    r = check();
  } catch (const std::exception& e) {
    r = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  const bool in_time = budget_s <= 0 || secs < budget_s;
  const bool ok = r.ok && in_time;
  if (!ok) ++failures;
  std::printf("%s %-22s %s; %.2f s", ok ? "PASS" : "FAIL", name, r.detail.c_str(), secs);
  if (budget_s > 0) std::printf(" (budget %.0f s)", budget_s);
  std::printf("\n");
  std::fflush(stdout);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Two-sided standard normal quantile for tail mass alpha, by bisection on erfc.
double z_critical(double alpha) {
  double lo = 0, hi = 40;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ZoomStack random_stack(const ZoomSchedule& s, std::uint64_t seed) {
  std::vector<Image> layers;
  for (int j = 0; j < s.levels(); ++j)
    layers.push_back(uniform_image(s.height(), s.width(), s.channels(), seed, static_cast<std::uint32_t>(j)));
  return ZoomStack(s, std::move(layers));
}

// Every (p, N) with p in {2, 4}, N <= 4 that tiles 64 x 64.
std::vector<ZoomSchedule> small_schedules() {
  std::vector<ZoomSchedule> out;
  for (int p : {2, 4})
    for (int n = 1; n <= 4; ++n) {
      try {
        out.emplace_back(p, n, 64, 64, 3);
      } catch (const ValidationError&) {
      }
    }
  return out;
}

Outcome consistency() {
  const auto schedules = small_schedules();
  double worst = 0;
  int pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const ZoomSchedule& s = schedules[trial % schedules.size()];
    const ZoomStack stack = random_stack(s, 500 + trial);
    for (int i = 0; i + 1 < s.levels(); ++i) {
      const Image outer = render_image(stack, i);
      const Image inner = render_image(stack, i + 1);
      const Image crop = crop_center(outer, s.height() / s.p(), s.width() / s.p());
      worst = std::max(worst, max_abs_diff(crop, downscale_content(inner, s.p(), 1)));
      ++pairs;
    }
  }
  return {worst < 1e-6, "100 stacks, " + std::to_string(pairs) + " level pairs, max diff " + num(worst)};
}

Outcome noise_statistics() {
  constexpr int kSamples = 10000;
  const std::vector<ZoomSchedule> schedules = {ZoomSchedule(2, 4, 16, 16, 1), ZoomSchedule(4, 3, 32, 32, 1)};
  struct Acc {
    std::vector<double> sum, sq;
  };
  std::vector<std::vector<Acc>> acc;
  std::size_t tests = 0;
  for (const auto& s : schedules) {
    const std::size_t per = static_cast<std::size_t>(s.height()) * s.width();
    acc.emplace_back(s.levels(), Acc{std::vector<double>(per), std::vector<double>(per)});
    tests += 2 * per * s.levels();
  }
  for (int n = 0; n < kSamples; ++n)
    for (std::size_t q = 0; q < schedules.size(); ++q) {
      const NoiseStack e = sample_noise_stack(schedules[q], 4242 + q, static_cast<std::uint32_t>(n + 1));
      for (int i = 0; i < schedules[q].levels(); ++i) {
        const Image r = render_noise(e, i, NoiseMode::kExact);
        const auto v = r.values();
        auto& a = acc[q][i];
        for (std::size_t k = 0; k < v.size(); ++k) {
          a.sum[k] += v[k];
          a.sq[k] += v[k] * v[k];
        }
      }
    }
  // Family-wise significance 0.001, split over every mean and variance test.
  const double zc = z_critical(0.001 / static_cast<double>(tests));
  double worst_mean = 0, worst_var = 0, worst_z = 0;
  for (const auto& levels : acc)
    for (const auto& a : levels)
      for (std::size_t k = 0; k < a.sum.size(); ++k) {
        const double m = a.sum[k] / kSamples;
        const double var = (a.sq[k] - kSamples * m * m) / (kSamples - 1);
        worst_mean = std::max(worst_mean, std::abs(m));
        worst_var = std::max(worst_var, std::abs(var - 1.0));
        // Under N(0, 1): mean ~ N(0, 1/n), sample variance ~ N(1, 2/(n-1)).
        worst_z = std::max({worst_z, std::abs(m) * std::sqrt(kSamples), std::abs(var - 1.0) * std::sqrt((kSamples - 1) / 2.0)});
      }
  const bool ok = worst_mean <= 0.05 && worst_var <= 0.1 && worst_z < zc;
  return {ok, "1e4 samples, p=2 N=4 and p=4 N=3; max |mean| " + num(worst_mean) + ", max |var-1| " +
                  num(worst_var) + ", max z " + num(worst_z) + " < " + num(zc)};
}

Outcome laplacian() {
  double worst = 0;
  const int sizes[][3] = {{64, 64, 3}, {64, 32, 1}, {32, 32, 3}, {128, 128, 1}};
  for (int trial = 0; trial < 100; ++trial) {
    const auto& d = sizes[trial % 4];
    const Image x = uniform_image(d[0], d[1], d[2], 9000 + trial);
    worst = std::max(worst, max_abs_diff(recompose(build_laplacian(x)), x));
  }
  return {worst < 1e-6, "100 images, max diff " + num(worst)};
}

Image checkerboard(int h, int w, double a) {
  Image x(h, w, 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) x(r, c, 0) = (r + c) % 2 ? a : -a;
  return x;
}

Outcome blending() {
  double worst = 0;
  const std::vector<ZoomSchedule> schedules = {ZoomSchedule(2, 3, 64, 64, 3), ZoomSchedule(2, 4, 64, 64, 3),
                                               ZoomSchedule(4, 2, 64, 64, 3)};
  int sets = 0;
  for (const auto& s : schedules)
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const ObservationSet obs = render_all(smooth_scene_stack(s, seed));
      const ObservationSet again = render_all(blend_stack(obs));
      for (int i = 0; i < s.levels(); ++i) worst = std::max(worst, max_abs_diff(again.estimate(i), obs.estimate(i)));
      ++sets;
    }
  const ZoomSchedule s(2, 3, 64, 64, 1);
  const ObservationSet board(s, {Image(64, 64, 1), Image(64, 64, 1), checkerboard(64, 64, 0.5)});
  const double multi = squared_norm(build_laplacian(blend_layer(board, 2)).bands[0]);
  const double naive = squared_norm(build_laplacian(naive_blend(board).layer(2)).bands[0]);
  const bool ok = worst < 2e-2 && naive < multi;
  return {ok, std::to_string(sets) + " consistent sets, max diff " + num(worst) + "; finest-band energy naive " +
                  num(naive) + " < multi-resolution " + num(multi)};
}

Outcome oracle() {
  const ZoomSchedule s(2, 3, 64, 64, 3);
  const ObservationSet targets = render_all(smooth_scene_stack(s, 11));
  SamplerConfig cfg;
  cfg.steps = 64;
  cfg.seed = 2024;
  const OracleDenoiser d(targets.estimates(), cfg.noise_schedule());
  const auto result = joint_sample(s, {"a", "b", "c"}, d, cfg);
  double worst = 1e9;
  std::string per;
  for (int i = 0; i < 3; ++i) {
    const double v = psnr(render_image(result.stack, i), targets.estimate(i));
    worst = std::min(worst, v);
    per += (i ? ", " : "") + num(v);
  }
  return {worst > 40.0, "PSNR per level [" + per + "] dB"};
}

Outcome gaussian() {
  constexpr int kRuns = 512;
  const ZoomSchedule s(2, 1, 32, 32, 1);
  const double sd = 0.35;
  Image mu(32, 32, 1);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) mu(r, c, 0) = 0.1 * std::sin(0.3 * r) * std::cos(0.2 * c);
  SamplerConfig cfg;
  cfg.steps = 128;
  cfg.omega = 0.0;
  const GaussianDenoiser g(mu, sd, cfg.noise_schedule());
  double sum = 0, sq = 0;
  for (int k = 0; k < kRuns; ++k) {
    cfg.seed = 70000 + k;
    const Image x = joint_sample(s, {"x"}, g, cfg).stack.layer(0);
    const auto xv = x.values();
    const auto mv = mu.values();
    for (std::size_t q = 0; q < xv.size(); ++q) {
      const double d = xv[q] - mv[q];
      sum += d;
      sq += d * d;
    }
  }
  const double n = kRuns * 1024.0;
  const double mean_err = sum / n;
  const double stdev = std::sqrt((sq - n * mean_err * mean_err) / (n - 1));
  const double se = stdev / std::sqrt(n);
  const double ratio = stdev / sd;
  const bool ok = std::abs(mean_err) < 3 * se && std::abs(ratio - 1.0) < 0.05;
  return {ok, "512 runs; mean offset " + num(mean_err / se) + " SE, std ratio " + num(ratio)};
}

Outcome grounding() {
  // Gradient against central differences.
  const ZoomSchedule s(2, 3, 16, 16, 3);
  double worst_rel = 0;
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Image> est;
    for (int i = 0; i < 3; ++i) est.push_back(uniform_image(16, 16, 3, 600 + trial, i));
    const ObservationSet obs(s, est);
    const Image xi = uniform_image(16, 16, 3, 700 + trial);
    const auto grad = grounding_grad(obs, xi);
    const double h = 1e-5;
    for (int i = 0; i < 3; ++i)
      for (int r = 0; r < 16; r += 3)
        for (int c = 1; c < 16; c += 4)
          for (int ch = 0; ch < 3; ++ch) {
            ObservationSet plus = obs, minus = obs;
            plus.estimate(i)(r, c, ch) += h;
            minus.estimate(i)(r, c, ch) -= h;
            const double fd = (grounding_loss(plus, xi) - grounding_loss(minus, xi)) / (2 * h);
            const double an = grad[i](r, c, ch);
            worst_rel = std::max(worst_rel, std::abs(fd - an) / std::max(1e-3, std::abs(an)));
          }
  }

  // 5 Adam steps at lr 0.1 on random problems.
  int decreased = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ZoomSchedule t(2, 1 + trial % 3, 16, 16, 1);
    std::vector<Image> est;
    for (int i = 0; i < t.levels(); ++i) est.push_back(uniform_image(16, 16, 1, 10000 + trial, i));
    const ObservationSet obs(t, est);
    GroundingConfig gc;
    gc.target = uniform_image(16, 16, 1, 20000 + trial);
    AdamState state;
    const ObservationSet out = apply_grounding(obs, gc, state);
    if (grounding_loss(out, gc.target) < grounding_loss(obs, gc.target)) ++decreased;
  }

  // Long single-level run.
  const ZoomSchedule one(2, 1, 16, 16, 3);
  GroundingConfig gc;
  gc.target = uniform_image(16, 16, 3, 31337);
  gc.steps = 500;
  AdamState state;
  const ObservationSet out = apply_grounding(ObservationSet(one, {uniform_image(16, 16, 3, 31338)}), gc, state);
  const double final_err = max_abs_diff(out.estimate(0), gc.target);

  const bool ok = worst_rel < 1e-4 && decreased >= 990 && final_err < 1e-2;
  return {ok, "grad rel err " + num(worst_rel) + "; loss decreased in " + std::to_string(decreased) +
                  "/1000; 500-step max |x-xi| " + num(final_err)};
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("zoomstack_accept_" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Outcome determinism() {
  const auto root = scratch("determinism");
  const std::string spec = (root / "scene.txt").string();
  {
    std::ofstream f(spec);
    f << "p = 2\nheight = 32\nwidth = 32\nsteps = 24\nseed = 5\n"
         "prompt = an island\nprompt = a beach\nprompt = a shell\n";
  }
  int files = 0;
  bool same = true;
  for (const char* backend : {"builtin-gaussian", "builtin-oracle"}) {
    std::vector<std::filesystem::path> outs;
    for (const char* run : {"a", "b"}) {
      const auto out = root / (std::string(backend) + "_" + run);
      std::ostringstream sink;
      const int code = run_cli(std::vector<std::string>{"--backend", backend, "generate", spec, "--out", out.string(),
                                                        "--frames", "9"},
                               sink, sink);
      if (code != 0) return {false, std::string(backend) + " generate exited " + std::to_string(code)};
      outs.push_back(out);
    }
    std::vector<std::filesystem::path> rel = {"stack.zstk"};
    for (int k = 0; k < 9; ++k) rel.push_back(std::filesystem::path("frames") / frame_name(k));
    for (const auto& r : rel) {
      same = same && read_bytes(outs[0] / r) == read_bytes(outs[1] / r);
      ++files;
    }
  }
  std::filesystem::remove_all(root.parent_path());
  return {same, std::to_string(files) + " file pairs compared, " + (same ? "all identical" : "mismatch")};
}

Outcome ablation() {
  const ZoomSchedule s(2, 3, 32, 32, 3);
  Image mu(32, 32, 3);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      for (int ch = 0; ch < 3; ++ch) mu(r, c, ch) = 0.3 * std::sin(0.2 * r + ch) * std::cos(0.17 * c);
  const std::vector<std::string> prompts = {"far", "mid", "near"};
  SamplerConfig base;
  base.steps = 32;
  base.seed = 99;
  const GaussianDenoiser g(mu, 0.3, base.noise_schedule());

  std::vector<std::pair<std::string, ZoomStack>> runs;
  auto add = [&](const std::string& name, SamplerConfig cfg) {
    runs.emplace_back(name, joint_sample(s, prompts, g, cfg).stack);
  };
  add("joint", base);
  SamplerConfig c = base;
  c.blend_mode = BlendMode::kIndependent;
  add("independent", c);
  c = base;
  c.blend_mode = BlendMode::kIterative;
  add("iterative", c);
  c = base;
  c.noise_mode = SamplerNoise::kIndependent;
  add("unshared-noise", c);

  double closest = 1e9;
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      double d = 0;
      for (int i = 0; i < s.levels(); ++i)
        d = std::max(d, max_abs_diff(runs[a].second.layer(i), runs[b].second.layer(i)));
      closest = std::min(closest, d);
    }

  bool chains_match = true;
  const ZoomSchedule single(2, 1, 32, 32, 3);
  for (int i = 0; i < s.levels(); ++i) {
    SamplerConfig one = base;
    one.seed = level_seed(base.seed, i);
    const ZoomStack r = joint_sample(single, {prompts[i]}, g, one).stack;
    const auto a = r.layer(0).values();
    const auto b = runs[1].second.layer(i).values();
    chains_match = chains_match && std::equal(a.begin(), a.end(), b.begin(), b.end());
  }
  return {closest > 0 && chains_match, "min pairwise max diff " + num(closest) + "; independent " +
                                           (chains_match ? "bit-equal to" : "differs from") + " single chains"};
}

}  // namespace

int main() {
  report("consistency", 10, consistency);
  report("noise-statistics", 60, noise_statistics);
  report("laplacian", 0, laplacian);
  report("blend-fixed-point", 0, blending);
  report("oracle-end-to-end", 120, oracle);
  report("gaussian-moments", 300, gaussian);
  report("grounding", 0, grounding);
  report("determinism", 0, determinism);
  report("ablation", 0, ablation);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
