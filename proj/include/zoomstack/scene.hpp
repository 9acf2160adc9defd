#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"
#include "zoomstack/sampler.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

/// Everything needed to generate one zoom stack.
///
/// Text format: one `key = value` per line, `#` starts a comment, blank lines
/// are ignored. Prompts are repeated `prompt = ...` lines, most zoomed-out
/// first. Keys:
///
///   p, N (alias levels), height, width, channels, seed, omega, steps,
///   schedule (cosine|linear), noise_mode (shared-exact|shared-pgain|independent),
///   blend_mode (multiresolution|naive|iterative|independent),
///   ground (PNG path, relative to the spec file), ground_steps, ground_lr,
///   output, prompt
///
/// N may be omitted, in which case it is the prompt count.
struct SceneSpec {
  std::vector<std::string> prompts;
  int p = 2;
  int levels = 0;
  int height = 64;
  int width = 64;
  int channels = 3;
  std::uint64_t seed = 0;
  double omega = 7.5;
  int steps = 256;
  ScheduleKind schedule = ScheduleKind::kCosine;
  SamplerNoise noise_mode = SamplerNoise::kSharedExact;
  BlendMode blend_mode = BlendMode::kMultiresolution;
  std::optional<std::filesystem::path> ground_image;
  int ground_steps = 5;
  double ground_lr = 0.1;
  std::filesystem::path output_dir = "zoom_out";

  ZoomSchedule zoom_schedule() const { return ZoomSchedule(p, levels, height, width, channels); }

  /// Sampler settings. Grounding is attached separately once the target is loaded.
  SamplerConfig sampler_config() const {
    SamplerConfig c;
    c.omega = omega;
    c.steps = steps;
    c.seed = seed;
    c.noise_mode = noise_mode;
    c.blend_mode = blend_mode;
    c.schedule = schedule;
    return c;
  }
};

// Enum spellings shared by the scene format and the CLI.

inline ScheduleKind parse_schedule_kind(const std::string& v) {
  if (v == "cosine") return ScheduleKind::kCosine;
  if (v == "linear") return ScheduleKind::kLinear;
  throw ValidationError("unknown schedule '" + v + "' (cosine|linear)");
}

inline SamplerNoise parse_noise_mode(const std::string& v) {
  if (v == "shared-exact") return SamplerNoise::kSharedExact;
  if (v == "shared-pgain") return SamplerNoise::kSharedGainP;
  if (v == "independent") return SamplerNoise::kIndependent;
  throw ValidationError("unknown noise_mode '" + v + "' (shared-exact|shared-pgain|independent)");
}

inline BlendMode parse_blend_mode(const std::string& v) {
  if (v == "multiresolution") return BlendMode::kMultiresolution;
  if (v == "naive") return BlendMode::kNaive;
  if (v == "iterative") return BlendMode::kIterative;
  if (v == "independent") return BlendMode::kIndependent;
  throw ValidationError("unknown blend_mode '" + v + "' (multiresolution|naive|iterative|independent)");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, int line, const std::string& key) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ParseError(line, "invalid value '" + v + "' for " + key);
  return out;
}

}  // namespace detail

inline SceneSpec parse_scene_text(const std::string& text, const std::filesystem::path& base_dir = {}) {
  SceneSpec spec;
  std::optional<int> declared_levels;
  int levels_line = 0;
  int p_line = 0;
  int last_line = 0;
  std::map<std::string, int> seen;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s.front() == '#') continue;
    last_line = line;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
    if (key != "prompt") {
      if (auto it = seen.find(key); it != seen.end())
        throw ParseError(line, "duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")");
      seen[key] = line;
    }
    try {
      if (key == "prompt") {
        if (value.empty()) throw ParseError(line, "empty prompt");
        spec.prompts.push_back(value);
      } else if (key == "p") {
        spec.p = detail::parse_number<int>(value, line, key);
        p_line = line;
        if (spec.p < 2) throw ParseError(line, "zoom base p must be >= 2, got " + value);
      } else if (key == "N" || key == "levels") {
        declared_levels = detail::parse_number<int>(value, line, key);
        levels_line = line;
        if (*declared_levels < 1) throw ParseError(line, "N must be >= 1");
      } else if (key == "height") {
        spec.height = detail::parse_number<int>(value, line, key);
      } else if (key == "width") {
        spec.width = detail::parse_number<int>(value, line, key);
      } else if (key == "channels") {
        spec.channels = detail::parse_number<int>(value, line, key);
      } else if (key == "seed") {
        spec.seed = detail::parse_number<std::uint64_t>(value, line, key);
      } else if (key == "omega") {
        spec.omega = detail::parse_number<double>(value, line, key);
        if (spec.omega < 0) throw ParseError(line, "omega must be >= 0");
      } else if (key == "steps") {
        spec.steps = detail::parse_number<int>(value, line, key);
        if (spec.steps < 1) throw ParseError(line, "steps must be >= 1");
      } else if (key == "schedule") {
        spec.schedule = parse_schedule_kind(value);
      } else if (key == "noise_mode") {
        spec.noise_mode = parse_noise_mode(value);
      } else if (key == "blend_mode") {
        spec.blend_mode = parse_blend_mode(value);
      } else if (key == "ground") {
        std::filesystem::path g = value;
        spec.ground_image = g.is_absolute() || base_dir.empty() ? g : base_dir / g;
      } else if (key == "ground_steps") {
        spec.ground_steps = detail::parse_number<int>(value, line, key);
        if (spec.ground_steps < 0) throw ParseError(line, "ground_steps must be >= 0");
      } else if (key == "ground_lr") {
        spec.ground_lr = detail::parse_number<double>(value, line, key);
        if (!(spec.ground_lr > 0)) throw ParseError(line, "ground_lr must be > 0");
      } else if (key == "output") {
        spec.output_dir = value;
      } else {
        throw ParseError(line, "unknown key '" + key + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(line, e.what());
    }
  }

  if (spec.prompts.empty()) throw ParseError(last_line, "no prompts given");
  const int count = static_cast<int>(spec.prompts.size());
  if (declared_levels && *declared_levels != count)
    throw ParseError(levels_line, "N=" + std::to_string(*declared_levels) + " but " + std::to_string(count) +
                                      " prompts were given");
  spec.levels = count;
  try {
    spec.sampler_config().validate(spec.zoom_schedule());
  } catch (const ValidationError& e) {
    throw ParseError(p_line ? p_line : last_line, e.what());
  }
  return spec;
}

inline SceneSpec parse_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scene spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene_text(buf.str(), path.parent_path());
}

}  // namespace zoomstack
