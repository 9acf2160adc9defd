#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"
#include "zoomstack/io.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

/// Largest level whose zoom p^i does not exceed `zoom`.
inline int level_for_zoom(const ZoomSchedule& s, double zoom) {
  int level = 0;
  while (level + 1 < s.levels() && static_cast<double>(s.zoom(level + 1)) <= zoom) ++level;
  return level;
}

/// Magnifies x about its center by `factor` >= 1 (bilinear) and keeps the
/// original frame.
inline Image zoom_about_center(const Image& x, double factor) {
  if (!(factor >= 1.0)) throw ValidationError("zoom factor must be >= 1");
  if (factor == 1.0) return x;
  const double cy = x.height() / 2.0;
  const double cx = x.width() / 2.0;
  Image out(x.height(), x.width(), x.channels());
  for (int r = 0; r < x.height(); ++r) {
    const double fy = std::clamp((r + 0.5 - cy) / factor + cy - 0.5, 0.0, x.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, x.height() - 1);
    const double ty = fy - y0;
    for (int c = 0; c < x.width(); ++c) {
      const double fx = std::clamp((c + 0.5 - cx) / factor + cx - 0.5, 0.0, x.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, x.width() - 1);
      const double tx = fx - x0;
      for (int ch = 0; ch < x.channels(); ++ch) {
        const double top = (1 - tx) * x(y0, x0, ch) + tx * x(y0, x1, ch);
        const double bot = (1 - tx) * x(y1, x0, ch) + tx * x(y1, x1, ch);
        out(r, c, ch) = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

/// Frame at continuous zoom z in [1, p^(N-1)]: the render of level
/// floor(log_p z), magnified by z / p^i.
inline Image render_frame(const ZoomStack& stack, double zoom) {
  const auto& s = stack.schedule();
  const double max_zoom = static_cast<double>(s.zoom(s.levels() - 1));
  if (!(zoom >= 1.0 && zoom <= max_zoom))
    throw ValidationError("zoom " + std::to_string(zoom) + " outside [1, " + std::to_string(max_zoom) + "]");
  const int level = level_for_zoom(s, zoom);
  return zoom_about_center(render_image(stack, level), zoom / static_cast<double>(s.zoom(level)));
}

/// frame_count zoom values from 1 to p^(N-1) with a constant ratio.
inline std::vector<double> zoom_sequence(const ZoomSchedule& s, int frame_count) {
  if (frame_count < 2) throw ValidationError("need at least 2 frames");
  const double max_zoom = static_cast<double>(s.zoom(s.levels() - 1));
  std::vector<double> z(frame_count);
  for (int k = 0; k < frame_count; ++k) z[k] = std::pow(max_zoom, static_cast<double>(k) / (frame_count - 1));
  z.front() = 1.0;
  z.back() = max_zoom;
  return z;
}

inline std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d.png", index);
  return buf;
}

/// Writes frame_NNNNN.png for every zoom in the sequence plus manifest.txt
/// ("index filename zoom" per line). Returns the zoom values.
inline std::vector<double> export_sequence(const ZoomStack& stack, int frame_count,
                                           const std::filesystem::path& dir) {
  const auto zooms = zoom_sequence(stack.schedule(), frame_count);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ValidationError("cannot create output directory " + dir.string());
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw ValidationError("cannot write manifest in " + dir.string());
  for (int k = 0; k < frame_count; ++k) {
    write_png(dir / frame_name(k), render_frame(stack, zooms[k]));
    char line[96];
    std::snprintf(line, sizeof line, "%d %s %.17g\n", k, frame_name(k).c_str(), zooms[k]);
    manifest << line;
  }
  if (!manifest) throw ValidationError("failed writing manifest in " + dir.string());
  return zooms;
}

}  // namespace zoomstack
