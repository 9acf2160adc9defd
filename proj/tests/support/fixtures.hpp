#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "zoomstack/blend.hpp"
#include "zoomstack/denoiser.hpp"
#include "zoomstack/diffusion.hpp"
#include "zoomstack/grounding.hpp"
#include "zoomstack/image.hpp"
#include "zoomstack/pyramid.hpp"
#include "zoomstack/rng.hpp"
#include "zoomstack/sampler.hpp"
#include "zoomstack/synthetic.hpp"
#include "zoomstack/verify.hpp"
#include "zoomstack/zoom.hpp"

namespace fixtures {

using namespace zoomstack;

inline ZoomStack random_stack(const ZoomSchedule& s, std::uint64_t seed) { return detail::random_stack(s, seed); }

// Reference downscale written straight from the definition, independent of
// the library's loops: weight w(a) w(b) on every pixel of a p x p block.
inline Image reference_downscale_once(const Image& x, int p, double gain = 1.0) {
  std::vector<double> w(p);
  double sum = 0.0;
  for (int u = 0; u < p; ++u) {
    const double d = u - (p - 1) / 2.0;
    w[u] = std::exp(-d * d / (0.5 * p * p));  // 2 sigma^2 with sigma = p/2
    sum += w[u];
  }
  Image out(x.height() / p, x.width() / p, x.channels());
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      for (int ch = 0; ch < x.channels(); ++ch) {
        double acc = 0.0;
        for (int a = 0; a < p; ++a)
          for (int b = 0; b < p; ++b) acc += w[a] * w[b] / (sum * sum) * x(r * p + a, c * p + b, ch);
        out(r, c, ch) = gain * acc;
      }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("zoomstack_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string echo_backend(const std::string& flags = {}) {
  return std::string("subprocess:") + ECHO_BACKEND + (flags.empty() ? "" : " " + flags);
}

}  // namespace fixtures
