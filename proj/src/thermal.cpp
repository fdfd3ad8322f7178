#include "brickyard/thermal.hpp"

#include <deque>

#include "brickyard/errors.hpp"

namespace brickyard {

void to_json(json& j, const HeatDetection& d) {
  j = json{{"box", {d.x0, d.y0, d.x1, d.y1}},
           {"distance", d.distance},
           {"position", {d.position.x(), d.position.y(), d.position.z()}},
           {"peak", d.peak}};
}

void from_json(const json& j, HeatDetection& d) {
  auto b = j.at("box");
  d.x0 = b[0];
  d.y0 = b[1];
  d.x1 = b[2];
  d.y1 = b[3];
  d.distance = j.at("distance");
  auto p = j.at("position");
  d.position = Eigen::Vector3d(p[0], p[1], p[2]);
  d.peak = j.at("peak");
}

std::optional<HeatDetection> detect_heat(const Image16& img, uint16_t threshold,
                                         const CameraModel& cam, double k) {
  int w = img.width, h = img.height;
  std::vector<int> comp(size_t(w) * h, -1);
  auto idx = [&](int x, int y) { return size_t(y) * w + x; };
  auto hot = [&](int x, int y) { return img.at(x, y) >= threshold; };

  int best_size = 0;
  HeatDetection best;
  int ncomp = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!hot(x, y) || comp[idx(x, y)] >= 0) continue;
      int size = 0, x0 = x, x1 = x, y0 = y, y1 = y;
      uint16_t peak = 0;
      std::deque<std::pair<int, int>> bfs{{x, y}};
      comp[idx(x, y)] = ncomp;
      while (!bfs.empty()) {
        auto [px, py] = bfs.front();
        bfs.pop_front();
        ++size;
        x0 = std::min(x0, px);
        x1 = std::max(x1, px);
        y0 = std::min(y0, py);
        y1 = std::max(y1, py);
        peak = std::max(peak, img.at(px, py));
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = px + dx, ny = py + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            if (!hot(nx, ny) || comp[idx(nx, ny)] >= 0) continue;
            comp[idx(nx, ny)] = ncomp;
            bfs.emplace_back(nx, ny);
          }
      }
      ++ncomp;
      if (size > best_size) {
        best_size = size;
        best.x0 = x0;
        best.x1 = x1;
        best.y0 = y0;
        best.y1 = y1;
        best.peak = peak;
      }
    }
  if (best_size == 0) return std::nullopt;

  double width_px = best.x1 - best.x0 + 1;
  best.distance = k / width_px;
  double cu = 0.5 * (best.x0 + best.x1) + 0.5;
  double cv = 0.5 * (best.y0 + best.y1) + 0.5;
  Eigen::Vector3d ray((cu - cam.cx) / cam.fx, (cv - cam.cy) / cam.fy, 1.0);
  best.position = ray * best.distance;  // depth along the optical axis
  return best;
}

double calibrate_heat_range(const std::vector<std::pair<Image16, double>>& frames,
                            uint16_t threshold, const CameraModel& cam) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [img, dist] : frames) {
    auto det = detect_heat(img, threshold, cam, 1.0);
    if (!det) continue;
    double width_px = det->x1 - det->x0 + 1;
    sum += dist * width_px;
    ++n;
  }
  if (n == 0) throw BadArgument("no calibration frame shows a hot blob");
  return sum / n;
}

}  // namespace brickyard
