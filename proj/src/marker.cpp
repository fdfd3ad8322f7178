#include "brickyard/marker.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "brickyard/errors.hpp"
#include "brickyard/parallel.hpp"

namespace brickyard {

int Mask::count() const {
  int c = 0;
  for (uint8_t v : on) c += v;
  return c;
}

Eigen::Vector3d rgb_to_hsv(uint8_t r8, uint8_t g8, uint8_t b8) {
  double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  double delta = mx - mn;
  double h = 0.0;
  if (delta > 0) {
    if (mx == r)
      h = 60.0 * std::fmod((g - b) / delta + 6.0, 6.0);
    else if (mx == g)
      h = 60.0 * ((b - r) / delta + 2.0);
    else
      h = 60.0 * ((r - g) / delta + 4.0);
  }
  double s = mx > 0 ? delta / mx : 0.0;
  return {h, s, mx};
}

namespace {

bool in_range(const Eigen::Vector3d& hsv, const HsvRange& r) {
  if (hsv(1) < r.s_min || hsv(2) < r.v_min) return false;
  double h = hsv(0);
  if (r.h_lo <= r.h_hi) return h >= r.h_lo && h <= r.h_hi;
  return h >= r.h_lo || h <= r.h_hi;  // hue wrap
}

Mask classify(const Image8& img, const HsvRange& r) {
  Mask m;
  m.width = img.width;
  m.height = img.height;
  m.on.assign(size_t(img.width) * img.height, 0);
  parallel_for(img.height, [&](int64_t y) {
    for (int x = 0; x < img.width; ++x) {
      const uint8_t* px = img.at(x, int(y));
      if (in_range(rgb_to_hsv(px[0], px[1], px[2]), r)) m.at(x, int(y)) = 1;
    }
  });
  return m;
}

Mask dilate_disk(const Mask& m, int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
  Mask out;
  out.width = m.width;
  out.height = m.height;
  out.on.assign(m.on.size(), 0);
  parallel_for(m.height, [&](int64_t y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, int(y))) continue;
      for (auto [dx, dy] : offs) {
        int nx = x + dx, ny = int(y) + dy;
        if (nx >= 0 && nx < m.width && ny >= 0 && ny < m.height) out.at(nx, ny) = 1;
      }
    }
  });
  return out;
}

}  // namespace

std::pair<Mask, Mask> color_masks(const Image8& img, const ColorMaskConfig& cfg) {
  Mask raw_y = classify(img, cfg.yellow);
  Mask raw_m = classify(img, cfg.magenta);
  Mask near_y = dilate_disk(raw_y, cfg.proximity_px);
  Mask near_m = dilate_disk(raw_m, cfg.proximity_px);
  for (size_t i = 0; i < raw_y.on.size(); ++i) {
    raw_y.on[i] &= near_m.on[i];
    raw_m.on[i] &= near_y.on[i];
  }
  return {raw_y, raw_m};
}

std::vector<Eigen::Vector2i> mask_corners(const Mask& m, const CornerConfig& cfg) {
  int w = m.width, h = m.height;
  std::vector<float> gx(size_t(w) * h, 0.f), gy(size_t(w) * h, 0.f);
  auto idx = [&](int x, int y) { return size_t(y) * w + x; };
  // Sobel over the binary mask, normalized so responses stay O(1)
  parallel_for(h, [&](int64_t yy) {
    int y = int(yy);
    if (y == 0 || y == h - 1) return;
    for (int x = 1; x < w - 1; ++x) {
      double p00 = m.at(x - 1, y - 1), p10 = m.at(x, y - 1), p20 = m.at(x + 1, y - 1);
      double p01 = m.at(x - 1, y), p21 = m.at(x + 1, y);
      double p02 = m.at(x - 1, y + 1), p12 = m.at(x, y + 1), p22 = m.at(x + 1, y + 1);
      gx[idx(x, y)] = float(((p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02)) / 4.0);
      gy[idx(x, y)] = float(((p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20)) / 4.0);
    }
  });

  int half = cfg.window / 2;
  std::vector<float> resp(size_t(w) * h, 0.f);
  parallel_for(h, [&](int64_t yy) {
    int y = int(yy);
    if (y < half + 1 || y >= h - half - 1) return;
    for (int x = half + 1; x < w - half - 1; ++x) {
      double sxx = 0, sxy = 0, syy = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          double a = gx[idx(x + dx, y + dy)], b = gy[idx(x + dx, y + dy)];
          sxx += a * a;
          sxy += a * b;
          syy += b * b;
        }
      double n = double(cfg.window) * cfg.window;
      sxx /= n;
      sxy /= n;
      syy /= n;
      double tr = sxx + syy;
      double det = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) + 4 * sxy * sxy));
      resp[idx(x, y)] = float(0.5 * (tr - det));
    }
  });

  std::vector<Eigen::Vector2i> corners;
  int r = cfg.nms_radius;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float v = resp[idx(x, y)];
      if (v < cfg.threshold) continue;
      bool peak = true;
      for (int dy = -r; dy <= r && peak; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          float u = resp[idx(nx, ny)];
          // ties go to the first pixel in scan order
          if (u > v || (u == v && (ny < y || (ny == y && nx < x)))) {
            peak = false;
            break;
          }
        }
      if (peak) corners.emplace_back(x, y);
    }
  return corners;
}

std::vector<Eigen::Vector2i> detect_marker_frame(const Image8& img, const ColorMaskConfig& mcfg,
                                                 const CornerConfig& ccfg) {
  auto [my, mm] = color_masks(img, mcfg);
  auto cy = mask_corners(my, ccfg);
  auto cm = mask_corners(mm, ccfg);

  auto paired = [&](const std::vector<Eigen::Vector2i>& own,
                    const std::vector<Eigen::Vector2i>& other) {
    std::vector<Eigen::Vector2i> keep;
    for (const auto& c : own)
      for (const auto& o : other)
        if ((c - o).squaredNorm() <= ccfg.partner_px * ccfg.partner_px) {
          keep.push_back(c);
          break;
        }
    return keep;
  };
  std::vector<Eigen::Vector2i> votes = paired(cy, cm);
  for (const auto& c : paired(cm, cy)) votes.push_back(c);
  if (votes.empty()) throw NoCandidate("no cross-color corner pairs");

  // components of the fused mask, scanline discovery order
  int w = my.width, h = my.height;
  std::vector<int> comp(size_t(w) * h, -1);
  auto idx = [&](int x, int y) { return size_t(y) * w + x; };
  auto fused = [&](int x, int y) { return my.at(x, y) || mm.at(x, y); };
  int ncomp = 0;
  std::vector<std::vector<Eigen::Vector2i>> members;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!fused(x, y) || comp[idx(x, y)] >= 0) continue;
      members.emplace_back();
      std::deque<Eigen::Vector2i> bfs{{x, y}};
      comp[idx(x, y)] = ncomp;
      while (!bfs.empty()) {
        auto p = bfs.front();
        bfs.pop_front();
        members[ncomp].push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = p.x() + dx, ny = p.y() + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            if (!fused(nx, ny) || comp[idx(nx, ny)] >= 0) continue;
            comp[idx(nx, ny)] = ncomp;
            bfs.push_back({nx, ny});
          }
      }
      ++ncomp;
    }

  std::vector<int> tally(ncomp, 0);
  for (const auto& c : votes) {
    // a corner peak can land a pixel or two off the mask; snap to the
    // nearest fused pixel nearby
    int best = -1;
    int best_d2 = ccfg.partner_px * ccfg.partner_px + 1;
    for (int dy = -ccfg.partner_px; dy <= ccfg.partner_px; ++dy)
      for (int dx = -ccfg.partner_px; dx <= ccfg.partner_px; ++dx) {
        int nx = c.x() + dx, ny = c.y() + dy;
        if (nx < 0 || nx >= w || ny < 0 || ny >= h || !fused(nx, ny)) continue;
        int d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
          best_d2 = d2;
          best = comp[idx(nx, ny)];
        }
      }
    if (best >= 0) tally[best]++;
  }

  int winner = -1, best_votes = 0;
  for (int i = 0; i < ncomp; ++i)
    if (tally[i] > best_votes) {
      best_votes = tally[i];
      winner = i;
    }
  if (winner < 0 || best_votes < ccfg.min_votes)
    throw NoCandidate("no cluster collected enough corner votes");
  return members[winner];
}

void to_json(json& j, const MarkerDetection& d) {
  j = json{{"intersection", {d.intersection.x(), d.intersection.y()}},
           {"leg_a_dir", {d.leg_a_dir.x(), d.leg_a_dir.y()}},
           {"leg_b_dir", {d.leg_b_dir.x(), d.leg_b_dir.y()}},
           {"side_a", d.side_a},
           {"side_b", d.side_b},
           {"valid", d.valid}};
}

void from_json(const json& j, MarkerDetection& d) {
  auto rd2 = [&](const char* k) {
    auto a = j.at(k);
    return Eigen::Vector2d(a[0], a[1]);
  };
  d.intersection = rd2("intersection");
  d.leg_a_dir = rd2("leg_a_dir");
  d.leg_b_dir = rd2("leg_b_dir");
  d.side_a = j.at("side_a");
  d.side_b = j.at("side_b");
  d.valid = j.at("valid");
}

namespace {

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                          return a == b;
                        }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

MarkerDetection accumulate_and_fit(const std::vector<MarkerFrameObs>& obs, const CameraModel& cam,
                                   const MarkerFitConfig& cfg) {
  if (obs.empty()) throw NoCandidate("no frames accumulated");
  double now = obs.front().stamp;
  for (const auto& o : obs) now = std::max(now, o.stamp);

  PointCloud ground_pts;
  for (const auto& o : obs) {
    if (now - o.stamp > cfg.window) continue;
    for (const auto& px : o.pixels) {
      Eigen::Vector3d dc((px.x() + 0.5 - cam.cx) / cam.fx, (px.y() + 0.5 - cam.cy) / cam.fy, 1.0);
      Eigen::Vector3d dir = o.camera.R * dc;
      if (dir.z() > -1e-9) continue;  // looking at or above the horizon
      double t = -o.camera.t.z() / dir.z();
      if (t <= 0) continue;
      Eigen::Vector3d p = o.camera.t + t * dir;
      ground_pts.points.emplace_back(p.x(), p.y(), 0.0);
    }
  }
  if (ground_pts.size() == 0) throw NoCandidate("no pixels project onto the ground");

  auto clusters = euclidean_cluster(ground_pts, cfg.cluster_link, cfg.min_cluster);
  if (clusters.empty()) throw NoCandidate("ground points form no cluster");
  std::vector<Eigen::Vector2d> pts;
  for (int i : clusters[0]) pts.emplace_back(ground_pts.points[i].x(), ground_pts.points[i].y());

  MarkerDetection det;
  auto hull = convex_hull(pts);
  if (hull.size() < 3) {
    for (const auto& p : pts) det.intersection += p;
    det.intersection /= double(pts.size());
    return det;  // degenerate footprint, never validates
  }

  // smallest-area oriented rectangle has a side on some hull edge
  double best_area = 1e300;
  Eigen::Vector2d bu, bv;
  double bu0 = 0, bu1 = 0, bv0 = 0, bv1 = 0;
  for (size_t i = 0; i < hull.size(); ++i) {
    Eigen::Vector2d e = hull[(i + 1) % hull.size()] - hull[i];
    double len = e.norm();
    if (len < 1e-12) continue;
    Eigen::Vector2d u = e / len, v(-u.y(), u.x());
    double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
    for (const auto& p : hull) {
      double a = u.dot(p), b = v.dot(p);
      u0 = std::min(u0, a);
      u1 = std::max(u1, a);
      v0 = std::min(v0, b);
      v1 = std::max(v1, b);
    }
    double area = (u1 - u0) * (v1 - v0);
    if (area < best_area) {
      best_area = area;
      bu = u;
      bv = v;
      bu0 = u0;
      bu1 = u1;
      bv0 = v0;
      bv1 = v1;
    }
  }

  Eigen::Vector2d corners[4] = {bu * bu0 + bv * bv0, bu * bu1 + bv * bv0, bu * bu1 + bv * bv1,
                                bu * bu0 + bv * bv1};
  // the L leaves one rectangle corner far from every sample; the
  // intersection corner is diagonally opposite it
  int empty = 0;
  double worst = -1.0;
  for (int c = 0; c < 4; ++c) {
    double sum = 0;
    for (const auto& p : pts) sum += (p - corners[c]).norm();
    if (sum > worst) {
      worst = sum;
      empty = c;
    }
  }
  int li = (empty + 2) % 4;
  det.intersection = corners[li];
  Eigen::Vector2d d1 = corners[(li + 1) % 4] - corners[li];
  Eigen::Vector2d d2 = corners[(li + 3) % 4] - corners[li];
  double l1 = d1.norm(), l2 = d2.norm();
  if (l1 >= l2) {
    det.side_a = l1;
    det.side_b = l2;
    det.leg_a_dir = l1 > 0 ? Eigen::Vector2d(d1 / l1) : Eigen::Vector2d::UnitX();
    det.leg_b_dir = l2 > 0 ? Eigen::Vector2d(d2 / l2) : Eigen::Vector2d::UnitY();
  } else {
    det.side_a = l2;
    det.side_b = l1;
    det.leg_a_dir = d2 / l2;
    det.leg_b_dir = l1 > 0 ? Eigen::Vector2d(d1 / l1) : Eigen::Vector2d::UnitY();
  }
  double la = std::max(cfg.leg_a, cfg.leg_b), lb = std::min(cfg.leg_a, cfg.leg_b);
  det.valid = std::abs(det.side_a - la) <= cfg.length_tol * la &&
              std::abs(det.side_b - lb) <= cfg.length_tol * lb;
  return det;
}

}  // namespace brickyard
