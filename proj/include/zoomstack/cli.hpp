#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zoomstack/blend.hpp"
#include "zoomstack/denoiser.hpp"
#include "zoomstack/errors.hpp"
#include "zoomstack/io.hpp"
#include "zoomstack/remote.hpp"
#include "zoomstack/sampler.hpp"
#include "zoomstack/scene.hpp"
#include "zoomstack/synthetic.hpp"
#include "zoomstack/verify.hpp"
#include "zoomstack/video.hpp"

namespace zoomstack {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitBackend = 2;
inline constexpr int kExitInvariant = 3;

namespace cli {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string backend = "builtin-gaussian";
  std::optional<std::filesystem::path> log;
  std::optional<std::filesystem::path> targets;
  std::optional<int> steps;
  double gaussian_std = 0.3;
  double timeout_s = 300.0;
};

struct OutputOptions {
  std::filesystem::path out;
  int frames = 33;
  std::optional<std::filesystem::path> dump_bands;
};

inline std::unique_ptr<Denoiser> make_backend(const GlobalOptions& g, const ZoomSchedule& s, const SamplerConfig& cfg) {
  const NoiseSchedule sched = cfg.noise_schedule();
  if (g.backend == "builtin-gaussian")
    return std::make_unique<GaussianDenoiser>(s.blank(), g.gaussian_std, sched);
  if (g.backend == "builtin-oracle") {
    ZoomStack target = g.targets ? read_zstk(*g.targets) : smooth_scene_stack(s, cfg.seed);
    if (!(target.schedule() == s))
      throw DimensionError("oracle targets have shape N=" + std::to_string(target.levels()) + " " +
                           target.layer(0).shape_string() + ", scene needs N=" + std::to_string(s.levels()) + " " +
                           s.blank().shape_string());
    return std::make_unique<OracleDenoiser>(render_all(target).estimates(), sched);
  }
  const auto colon = g.backend.find(':');
  const std::string scheme = g.backend.substr(0, colon);
  if (colon != std::string::npos && (scheme == "remote" || scheme == "tcp" || scheme == "subprocess")) {
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(g.timeout_s * 1000));
    return std::make_unique<RemoteDenoiser>(open_endpoint(g.backend), timeout);
  }
  throw ValidationError("unknown backend '" + g.backend +
                        "' (builtin-oracle|builtin-gaussian|remote:HOST:PORT|subprocess:CMD)");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ValidationError("cannot create directory " + dir.string());
}

inline std::string numbered(const std::string& stem, int k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02d.png", stem.c_str(), k);
  return buf;
}

// Band images are small signed values; a gain of 4 makes them visible.
inline void dump_bands(const ZoomStack& stack, const std::filesystem::path& dir) {
  ensure_dir(dir);
  const ObservationSet obs = render_all(stack);
  const int p = stack.schedule().p();
  for (int i = 0; i < stack.levels(); ++i) {
    const LaplacianPyramid avg = blended_pyramid(obs, i);
    for (int k = 0; k <= avg.band_count(); ++k) {
      const Image& band = k < avg.band_count() ? avg.bands[k] : avg.residual;
      char name[64];
      std::snprintf(name, sizeof name, "L%02d_band%02d.png", i, k);
      write_png(dir / name, k < avg.band_count() ? 4.0 * band : band);
      for (int m = 0; m <= i; ++m) {
        if (!contributes(p, i, m, k)) continue;
        const LaplacianPyramid own = build_laplacian(upscaled_crop(obs, i, m));
        std::snprintf(name, sizeof name, "L%02d_band%02d_obs%02d.png", i, k, m);
        write_png(dir / name, k < own.band_count() ? 4.0 * own.bands[k] : own.residual);
      }
    }
  }
}

/// stack.zstk, raw layers, per-level renders and the zoom frames.
inline void write_outputs(const ZoomStack& stack, const OutputOptions& o, std::ostream& out) {
  ensure_dir(o.out);
  write_zstk(o.out / "stack.zstk", stack);
  ensure_dir(o.out / "layers");
  ensure_dir(o.out / "renders");
  for (int i = 0; i < stack.levels(); ++i) {
    write_png(o.out / "layers" / numbered("layer", i), stack.layer(i));
    write_png(o.out / "renders" / numbered("render", i), render_image(stack, i));
  }
  if (o.frames > 0) export_sequence(stack, o.frames, o.out / "frames");
  if (o.dump_bands) dump_bands(stack, *o.dump_bands);
  out << "wrote " << (o.out / "stack.zstk").string();
  if (o.frames > 0) out << " and " << o.frames << " frames";
  out << "\n";
}

inline void write_log(const GlobalOptions& g, const SamplingTrace& trace) {
  if (!g.log) return;
  std::ofstream os(*g.log);
  if (!os) throw ValidationError("cannot open log " + g.log->string());
  write_trace(os, trace);
  if (!os) throw ValidationError("failed writing log " + g.log->string());
}

inline SceneSpec load_spec(const std::filesystem::path& path, const GlobalOptions& g) {
  SceneSpec spec = parse_scene_spec(path);
  if (g.seed) spec.seed = *g.seed;
  if (g.steps) {
    if (*g.steps < 1) throw ValidationError("--steps must be >= 1");
    spec.steps = *g.steps;
  }
  return spec;
}

inline Image load_ground_image(const std::filesystem::path& path, const ZoomSchedule& s) {
  if (s.channels() != 1 && s.channels() != 3)
    throw ValidationError("grounding images need 1 or 3 channels, scene has " + std::to_string(s.channels()));
  Image xi = read_png(path, s.channels());
  if (xi.height() != s.height() || xi.width() != s.width())
    throw DimensionError("grounding image " + path.string() + " is " + std::to_string(xi.height()) + "x" +
                         std::to_string(xi.width()) + ", scene is " + std::to_string(s.height()) + "x" +
                         std::to_string(s.width()));
  return xi;
}

inline int run_scene(const SceneSpec& spec, SamplerConfig cfg, const GlobalOptions& g, OutputOptions o,
                     std::ostream& out) {
  const ZoomSchedule s = spec.zoom_schedule();
  const auto backend = make_backend(g, s, cfg);
  const SamplingResult result = joint_sample(s, spec.prompts, *backend, cfg);
  const double err = consistency_error(result.stack);
  if (!(err < 1e-6))
    throw InvariantError("cross-level consistency violated after sampling (max diff " + std::to_string(err) + ")");
  write_log(g, result.trace);
  if (o.out.empty()) o.out = spec.output_dir;
  write_outputs(result.stack, o, out);
  return kExitOk;
}

inline void attach_grounding(SamplerConfig& cfg, const SceneSpec& spec, const std::filesystem::path& image) {
  const ZoomSchedule s = spec.zoom_schedule();
  GroundingConfig gc;
  gc.target = load_ground_image(image, s);
  gc.steps = spec.ground_steps;
  gc.learning_rate = spec.ground_lr;
  cfg.grounding = gc;
}

/// Prints the error and maps it onto the exit-code contract.
inline int report_error(std::exception_ptr e, std::ostream& err) {
  try {
    std::rethrow_exception(e);
  } catch (const ValidationError& x) {
    err << "error: " << x.what() << "\n";
    return kExitValidation;
  } catch (const BackendError& x) {
    err << "backend error: " << x.what() << "\n";
    return kExitBackend;
  } catch (const InvariantError& x) {
    err << "invariant violated: " << x.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& x) {
    err << "internal error: " << x.what() << "\n";
    return kExitInvariant;
  } catch (...) {
    err << "internal error: unknown exception\n";
    return kExitInvariant;
  }
}

}  // namespace cli

/// Entry point of the `zoomstack` tool. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-scale zoom stack generation", "zoomstack"};
  app.require_subcommand(1);
  app.fallthrough();

  cli::GlobalOptions g;
  std::uint64_t seed = 0;
  std::string log;
  std::string targets;
  int steps = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the scene seed");
  app.add_option("--backend", g.backend, "builtin-oracle | builtin-gaussian | remote:HOST:PORT | subprocess:CMD");
  auto* log_opt = app.add_option("--log", log, "Write the per-step trace (JSON lines) here");
  auto* targets_opt =
      app.add_option("--targets", targets, "ZSTK stack for builtin-oracle (default: a smooth procedural scene)");
  auto* steps_opt = app.add_option("--steps", steps, "Override the number of diffusion steps T");
  app.add_option("--gaussian-std", g.gaussian_std, "Data std of builtin-gaussian")->check(CLI::PositiveNumber);
  app.add_option("--timeout", g.timeout_s, "Per-request backend timeout in seconds")->check(CLI::PositiveNumber);

  cli::OutputOptions o;
  std::string out_dir, bands_dir;
  auto add_output = [&](CLI::App* sub, bool bands) {
    sub->add_option("--out", out_dir, "Output directory (default: the spec's output)");
    sub->add_option("--frames", o.frames, "Number of zoom frames to export (0 = none)")->check(CLI::NonNegativeNumber);
    if (bands) sub->add_option("--dump-bands", bands_dir, "Write per-band contribution PNGs here");
  };

  std::string spec_path, image_path, mode, stack_path, endpoint;

  auto* generate = app.add_subcommand("generate", "Jointly sample a zoom stack and write it with frames");
  generate->add_option("spec", spec_path)->required();
  add_output(generate, true);

  auto* ground = app.add_subcommand("ground", "Generate with the level-0 view grounded on a photo");
  ground->add_option("spec", spec_path)->required();
  ground->add_option("--image", image_path, "PNG matching the scene size")->required();
  add_output(ground, true);

  auto* ablate = app.add_subcommand("ablate", "Run one ablation variant");
  ablate->add_option("spec", spec_path)->required();
  ablate->add_option("--mode", mode)
      ->required()
      ->check(CLI::IsMember({"joint", "independent", "iterative", "naive", "unshared-noise"}));
  add_output(ablate, false);

  auto* render = app.add_subcommand("render", "Export zoom frames from a ZSTK stack");
  render->add_option("stack", stack_path)->required();
  add_output(render, false);

  auto* verify = app.add_subcommand("verify", "Run the built-in property checks");

  auto* serve_check = app.add_subcommand("serve-check", "Handshake with a denoiser backend");
  serve_check->add_option("endpoint", endpoint, "remote:HOST:PORT | tcp:HOST:PORT | subprocess:CMD")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*seed_opt) g.seed = seed;
  if (*log_opt) g.log = log;
  if (*targets_opt) g.targets = targets;
  if (*steps_opt) g.steps = steps;
  o.out = out_dir;
  if (!bands_dir.empty()) o.dump_bands = bands_dir;

  try {
    if (*generate || *ground) {
      const SceneSpec spec = cli::load_spec(spec_path, g);
      SamplerConfig cfg = spec.sampler_config();
      if (*ground)
        cli::attach_grounding(cfg, spec, image_path);
      else if (spec.ground_image)
        cli::attach_grounding(cfg, spec, *spec.ground_image);
      return cli::run_scene(spec, cfg, g, o, out);
    }
    if (*ablate) {
      const SceneSpec spec = cli::load_spec(spec_path, g);
      SamplerConfig cfg = spec.sampler_config();
      cfg.noise_mode = SamplerNoise::kSharedExact;
      cfg.blend_mode = BlendMode::kMultiresolution;
      if (mode == "independent") cfg.blend_mode = BlendMode::kIndependent;
      if (mode == "iterative") cfg.blend_mode = BlendMode::kIterative;
      if (mode == "naive") cfg.blend_mode = BlendMode::kNaive;
      if (mode == "unshared-noise") cfg.noise_mode = SamplerNoise::kIndependent;
      if (o.out.empty()) o.out = spec.output_dir / ("ablate-" + mode);
      return cli::run_scene(spec, cfg, g, o, out);
    }
    if (*render) {
      const ZoomStack stack = read_zstk(stack_path);
      if (o.frames < 2) throw ValidationError("render needs --frames >= 2");
      if (o.out.empty()) o.out = std::filesystem::path(stack_path).parent_path() / "frames";
      export_sequence(stack, o.frames, o.out);
      out << "wrote " << o.frames << " frames to " << o.out.string() << "\n";
      return kExitOk;
    }
    if (*verify) {
      bool all = true;
      for (const auto& r : run_verify_suites()) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
      }
      if (!all) throw InvariantError("built-in property suite failed");
      return kExitOk;
    }
    if (*serve_check) {
      const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(g.timeout_s * 1000));
      const auto version = handshake_check(endpoint, std::min(timeout, std::chrono::milliseconds(10000)));
      out << "handshake ok, protocol version " << version << "\n";
      return kExitOk;
    }
  } catch (...) {
    return cli::report_error(std::current_exception(), err);
  }
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(std::move(args), out, err);
}

}  // namespace zoomstack
