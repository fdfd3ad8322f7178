#include "brickyard/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "brickyard/parallel.hpp"
#include "brickyard/rng.hpp"

namespace brickyard {

RigidTransform Scene::frame(const std::string& name) const {
  if (name == "world") return RigidTransform::identity();
  auto it = frames.find(name);
  if (it == frames.end()) throw BadArgument("scene has no frame '" + name + "'");
  return it->second;
}

OrientedBox Scene::brick_box(const Brick& b) const {
  OrientedBox box;
  box.half = Eigen::Vector3d(0.5 * brick_length(b.type), 0.5 * kBrickSide, 0.5 * kBrickSide);
  RigidTransform local = planar_to_rigid(b.pose, b.z_base + 0.5 * kBrickSide);
  box.pose = compose(frame(b.frame), local);
  return box;
}

// ---------------------------------------------------------------- json

static void to_json(json& j, const Plane& p) {
  j = json{{"n", {p.n.x(), p.n.y(), p.n.z()}}, {"d", p.d}};
}
static void from_json(const json& j, Plane& p) {
  auto n = j.at("n").get<std::vector<double>>();
  p.n = Eigen::Vector3d(n[0], n[1], n[2]).normalized();
  p.d = j.at("d").get<double>();
}

static void to_json(json& j, const OrientedBox& b) {
  j = json{{"pose", b.pose}, {"half", {b.half.x(), b.half.y(), b.half.z()}}};
}
static void from_json(const json& j, OrientedBox& b) {
  b.pose = j.at("pose").get<RigidTransform>();
  auto h = j.at("half").get<std::vector<double>>();
  b.half = Eigen::Vector3d(h[0], h[1], h[2]);
}

static void to_json(json& j, const MarkerSpec& m) {
  j = json{{"pose", m.pose}, {"leg_a", m.leg_a}, {"leg_b", m.leg_b},
           {"width", m.width}, {"stripe", m.stripe}};
}
static void from_json(const json& j, MarkerSpec& m) {
  m.pose = j.at("pose").get<PlanarPose>();
  m.leg_a = j.at("leg_a").get<double>();
  m.leg_b = j.at("leg_b").get<double>();
  m.width = j.at("width").get<double>();
  m.stripe = j.at("stripe").get<double>();
}

static void to_json(json& j, const HeatSource& h) {
  j = json{{"position", {h.position.x(), h.position.y(), h.position.z()}},
           {"radius", h.radius}, {"temp_c", h.temp_c}};
}
static void from_json(const json& j, HeatSource& h) {
  auto p = j.at("position").get<std::vector<double>>();
  h.position = Eigen::Vector3d(p[0], p[1], p[2]);
  h.radius = j.at("radius").get<double>();
  h.temp_c = j.at("temp_c").get<double>();
}

void to_json(json& j, const Scene& s) {
  j = json::object();
  j["ground"] = s.ground;
  j["has_ground"] = s.has_ground;
  j["frames"] = json::object();
  for (const auto& [name, T] : s.frames) j["frames"][name] = T;
  j["bricks"] = s.bricks;
  j["distractors"] = s.distractors;
  if (s.marker) j["marker"] = *s.marker;
  j["fake_markers"] = s.fake_markers;
  j["heat_sources"] = s.heat_sources;
  j["ambient_c"] = s.ambient_c;
}

void from_json(const json& j, Scene& s) {
  s = Scene{};
  if (j.contains("ground")) s.ground = j.at("ground").get<Plane>();
  s.has_ground = j.value("has_ground", true);
  if (j.contains("frames"))
    for (auto it = j.at("frames").begin(); it != j.at("frames").end(); ++it)
      s.frames[it.key()] = it.value().get<RigidTransform>();
  if (j.contains("bricks")) s.bricks = j.at("bricks").get<std::vector<Brick>>();
  if (j.contains("distractors"))
    s.distractors = j.at("distractors").get<std::vector<OrientedBox>>();
  if (j.contains("marker")) s.marker = j.at("marker").get<MarkerSpec>();
  if (j.contains("fake_markers"))
    s.fake_markers = j.at("fake_markers").get<std::vector<MarkerSpec>>();
  if (j.contains("heat_sources"))
    s.heat_sources = j.at("heat_sources").get<std::vector<HeatSource>>();
  s.ambient_c = j.value("ambient_c", 30.0);
}

// ---------------------------------------------------------------- rays

namespace {

// slab test in the box frame; entry hits only (origin outside the box)
bool ray_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const OrientedBox& box,
             double& t_hit, Eigen::Vector3d& normal) {
  Eigen::Vector3d ol = box.pose.R.transpose() * (o - box.pose.t);
  Eigen::Vector3d dl = box.pose.R.transpose() * d;
  double t0 = 0.0, t1 = 1e300;
  int axis = -1;
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    double h = box.half[a];
    if (std::abs(dl[a]) < 1e-14) {
      if (ol[a] < -h || ol[a] > h) return false;
      continue;
    }
    double inv = 1.0 / dl[a];
    double ta = (-h - ol[a]) * inv;
    double tb = (h - ol[a]) * inv;
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis = a;
      sign = s;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (axis < 0 || t0 <= 1e-9) return false;  // inside or behind
  t_hit = t0;
  Eigen::Vector3d nl = Eigen::Vector3d::Zero();
  nl[axis] = sign;
  normal = box.pose.R * nl;
  return true;
}

}  // namespace

SceneGeometry::SceneGeometry(const Scene& scene, bool include_ground,
                             bool include_distractors) {
  for (const Brick& b : scene.bricks) boxes_.emplace_back(scene.brick_box(b), b.id);
  if (include_distractors)
    for (const OrientedBox& d : scene.distractors) boxes_.emplace_back(d, kLabelDistractor);
  if (include_ground && scene.has_ground) ground_ = scene.ground;
}

std::optional<RayHit> SceneGeometry::cast(const Eigen::Vector3d& origin,
                                          const Eigen::Vector3d& dir, double t_max) const {
  RayHit best;
  best.t = t_max;
  bool found = false;
  for (const auto& [box, label] : boxes_) {
    double t;
    Eigen::Vector3d n;
    if (ray_box(origin, dir, box, t, n) && t < best.t) {
      best = {t, label, n};
      found = true;
    }
  }
  if (ground_) {
    double denom = ground_->n.dot(dir);
    if (std::abs(denom) > 1e-14) {
      double t = (ground_->d - ground_->n.dot(origin)) / denom;
      if (t > 1e-9 && t < best.t) {
        Eigen::Vector3d n = denom < 0 ? ground_->n : Eigen::Vector3d(-ground_->n);
        best = {t, kLabelGround, n};
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

// ---------------------------------------------------------------- render

namespace {

struct AngularWindow {
  double az0 = 0, az_lo = 0, az_hi = 0, el_lo = 0, el_hi = 0;
  bool valid = false;
};

AngularWindow target_window(const SceneGeometry& geom, const Eigen::Vector3d& o,
                            bool include_ground, double margin) {
  AngularWindow w;
  if (geom.boxes().empty()) return w;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& [box, label] : geom.boxes()) centroid += box.pose.t;
  centroid /= double(geom.boxes().size());
  Eigen::Vector3d ref = centroid - o;
  if (ref.norm() < 1e-9) return w;
  w.az0 = std::atan2(ref.y(), ref.x());
  double dlo = 0, dhi = 0, el_lo = 1e9, el_hi = -1e9;
  auto take = [&](const Eigen::Vector3d& p) {
    Eigen::Vector3d v = p - o;
    double r = v.norm();
    if (r < 1e-9) return;
    double daz = normalize_angle(std::atan2(v.y(), v.x()) - w.az0);
    double el = std::asin(std::clamp(v.z() / r, -1.0, 1.0));
    dlo = std::min(dlo, daz);
    dhi = std::max(dhi, daz);
    el_lo = std::min(el_lo, el);
    el_hi = std::max(el_hi, el);
  };
  for (const auto& [box, label] : geom.boxes()) {
    for (int mask = 0; mask < 8; ++mask) {
      Eigen::Vector3d h((mask & 1) ? box.half.x() : -box.half.x(),
                        (mask & 2) ? box.half.y() : -box.half.y(),
                        (mask & 4) ? box.half.z() : -box.half.z());
      Eigen::Vector3d corner = box.pose.t + box.pose.R * h;
      take(corner);
      if (include_ground) take(Eigen::Vector3d(corner.x(), corner.y(), 0.0));
    }
  }
  w.az_lo = dlo - margin;
  w.az_hi = dhi + margin;
  w.el_lo = std::max(el_lo - margin, -0.5 * M_PI + 1e-3);
  w.el_hi = std::min(el_hi + margin, 0.5 * M_PI - 1e-3);
  w.valid = true;
  return w;
}

}  // namespace

PointCloud raycast_model(const Scene& scene, const RigidTransform& sensor,
                         const RenderConfig& cfg) {
  SceneGeometry geom(scene, cfg.include_ground, false);
  const Eigen::Vector3d o = sensor.t;
  AngularWindow w = target_window(geom, o, cfg.include_ground, cfg.window_margin);
  PointCloud out;
  out.frame = "world";
  if (!w.valid) return out;
  int naz = std::max(1, int(std::ceil((w.az_hi - w.az_lo) / cfg.angular_step)) + 1);
  int nel = std::max(1, int(std::ceil((w.el_hi - w.el_lo) / cfg.angular_step)) + 1);
  int64_t total = int64_t(naz) * nel;
  std::vector<uint8_t> hit(total, 0);
  std::vector<Eigen::Vector3d> pts(total), nrm(total);
  std::vector<int> lbl(total);
  parallel_for(total, [&](int64_t i) {
    int ie = int(i / naz), ia = int(i % naz);
    double az = w.az0 + w.az_lo + ia * cfg.angular_step;
    double el = w.el_lo + ie * cfg.angular_step;
    Eigen::Vector3d dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                        std::sin(el));
    auto h = geom.cast(o, dir);
    if (!h) return;
    hit[i] = 1;
    pts[i] = o + h->t * dir;
    nrm[i] = h->normal;
    lbl[i] = h->label;
  });
  for (int64_t i = 0; i < total; ++i) {
    if (!hit[i]) continue;
    out.points.push_back(pts[i]);
    out.normals.push_back(nrm[i]);
    out.labels.push_back(lbl[i]);
  }
  return out;
}

PointCloud render_model_cloud(const Scene& scene, const RigidTransform& sensor,
                              const RenderConfig& cfg) {
  PointCloud raw = raycast_model(scene, sensor, cfg);
  if (raw.points.empty()) throw EmptyView("no model surface in view");
  return voxel_downsample(raw, cfg.voxel);
}

// ---------------------------------------------------------------- lidar

PointCloud simulate_lidar_scan(const Scene& scene, const std::vector<RigidTransform>& trajectory,
                               const LidarModel& model, uint64_t seed) {
  if (trajectory.empty()) throw BadArgument("empty sensor trajectory");
  SceneGeometry geom(scene, true, true);
  int naz = std::max(1, int(std::floor(2.0 * M_PI / model.azimuth_step)));
  int64_t per_pose = int64_t(model.rings) * naz;
  int64_t total = per_pose * int64_t(trajectory.size());
  std::vector<uint8_t> hit(total, 0);
  std::vector<Eigen::Vector3d> pts(total);
  parallel_for(total, [&](int64_t i) {
    int64_t pose_i = i / per_pose;
    int ring = int((i % per_pose) / naz);
    int ia = int(i % naz);
    const RigidTransform& T = trajectory[pose_i];
    double el = model.elevation_min + ring * model.elevation_step;
    double az = ia * model.azimuth_step;
    Eigen::Vector3d dir_s(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                          std::sin(el));
    Eigen::Vector3d dir = T.R * dir_s;
    auto h = geom.cast(T.t, dir, model.max_range);
    if (!h) return;
    double range = h->t;
    if (model.sigma_range > 0.0) {
      Rng noise(mix_seed(seed, uint64_t(i)));
      range += model.sigma_range * noise.gaussian();
    }
    hit[i] = 1;
    pts[i] = T.t + range * dir;
  });
  PointCloud out;
  out.frame = "world";
  for (int64_t i = 0; i < total; ++i)
    if (hit[i]) out.points.push_back(pts[i]);
  return out;
}

std::vector<RigidTransform> arc_trajectory(const Eigen::Vector3d& target, double radius,
                                           double height, int n, double arc_span) {
  std::vector<RigidTransform> out;
  double span_angle = arc_span / std::max(radius, 1e-6);
  for (int k = 0; k < n; ++k) {
    double u = n > 1 ? (double(k) / (n - 1) - 0.5) : 0.0;
    double a = M_PI + u * span_angle;  // approach from -X
    Eigen::Vector3d pos = target + Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a), 0);
    pos.z() = height;
    RigidTransform T;
    Eigen::Vector3d fwd = target - pos;
    fwd.z() = 0;
    if (fwd.norm() < 1e-9) fwd = Eigen::Vector3d::UnitX();
    Eigen::Vector3d x = fwd.normalized();
    Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d y = z.cross(x);
    T.R.col(0) = x;
    T.R.col(1) = y;
    T.R.col(2) = z;
    T.t = pos;
    out.push_back(T);
  }
  return out;
}

// ---------------------------------------------------------------- images

void save_ppm(const std::string& path, const Image8& img) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw BadFile("cannot open " + path + " for writing");
  std::fprintf(f, "P6\n%d %d\n255\n", img.width, img.height);
  std::fwrite(img.rgb.data(), 1, img.rgb.size(), f);
  std::fclose(f);
}

Image8 load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadFile("cannot open " + path);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0) throw BadFile("bad ppm " + path);
  in.get();
  Image8 img;
  img.width = w;
  img.height = h;
  img.rgb.resize(size_t(w) * h * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), std::streamsize(img.rgb.size()));
  if (!in) throw BadFile("truncated ppm " + path);
  return img;
}

void save_pgm16(const std::string& path, const Image16& img) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw BadFile("cannot open " + path + " for writing");
  std::fprintf(f, "P5\n%d %d\n65535\n", img.width, img.height);
  for (uint16_t v : img.gray) {
    uint8_t hi = uint8_t(v >> 8), lo = uint8_t(v & 0xff);
    std::fputc(hi, f);
    std::fputc(lo, f);
  }
  std::fclose(f);
}

Image16 load_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadFile("cannot open " + path);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 65535 || w <= 0 || h <= 0) throw BadFile("bad pgm " + path);
  in.get();
  Image16 img;
  img.width = w;
  img.height = h;
  img.gray.resize(size_t(w) * h);
  for (auto& v : img.gray) {
    int hi = in.get(), lo = in.get();
    if (hi < 0 || lo < 0) throw BadFile("truncated pgm " + path);
    v = uint16_t((hi << 8) | lo);
  }
  return img;
}

namespace {

// stripe color inside the L, or nullptr
const uint8_t* marker_color(const MarkerSpec& m, double wx, double wy) {
  static const uint8_t yellow[3] = {255, 255, 0};
  static const uint8_t magenta[3] = {255, 0, 255};
  Eigen::Vector2d local = apply(inverse(m.pose), Eigen::Vector2d(wx, wy));
  double x = local.x(), y = local.y();
  bool in_a = x >= 0 && x <= m.leg_a && y >= 0 && y <= m.width;
  bool in_b = x >= 0 && x <= m.width && y >= 0 && y <= m.leg_b;
  if (!in_a && !in_b) return nullptr;
  int band = int(std::floor(std::max(x, y) / m.stripe));
  return (band % 2 == 0) ? yellow : magenta;
}

}  // namespace

Image8 synth_marker_image(const Scene& scene, const RigidTransform& camera_pose,
                          const CameraModel& cam, double pixel_noise, uint64_t seed) {
  Image8 img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(size_t(cam.width) * cam.height * 3, 0);
  std::vector<int64_t> marker_px_rows(cam.height, 0);
  const Eigen::Vector3d o = camera_pose.t;
  parallel_for(cam.height, [&](int64_t v) {
    Rng noise(mix_seed(seed, uint64_t(v)));
    for (int u = 0; u < cam.width; ++u) {
      Eigen::Vector3d dc((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
      Eigen::Vector3d dir = camera_pose.R * dc;
      uint8_t px[3] = {180, 200, 220};  // sky
      double denom = scene.ground.n.dot(dir);
      if (scene.has_ground && std::abs(denom) > 1e-12) {
        double t = (scene.ground.d - scene.ground.n.dot(o)) / denom;
        if (t > 0) {
          Eigen::Vector3d p = o + t * dir;
          px[0] = px[1] = px[2] = 110;  // ground
          const uint8_t* c = nullptr;
          if (scene.marker) c = marker_color(*scene.marker, p.x(), p.y());
          if (!c)
            for (const MarkerSpec& fm : scene.fake_markers)
              if ((c = marker_color(fm, p.x(), p.y()))) break;
          if (c) {
            std::memcpy(px, c, 3);
            if (scene.marker && marker_color(*scene.marker, p.x(), p.y()))
              marker_px_rows[v]++;
          }
        }
      }
      uint8_t* dst = img.at(u, int(v));
      for (int ch = 0; ch < 3; ++ch) {
        double val = px[ch];
        if (pixel_noise > 0) val += pixel_noise * noise.gaussian();
        dst[ch] = uint8_t(std::clamp(val, 0.0, 255.0));
      }
    }
  });
  if (scene.marker) {
    int64_t total = 0;
    for (int64_t c : marker_px_rows) total += c;
    if (total == 0) throw MarkerNotVisible("marker projects outside the image");
  }
  return img;
}

Image16 synth_thermal_image(const Scene& scene, const RigidTransform& camera_pose,
                            const CameraModel& cam) {
  Image16 img;
  img.width = cam.width;
  img.height = cam.height;
  uint16_t ambient = uint16_t(std::clamp(scene.ambient_c * 100.0, 0.0, 65535.0));
  img.gray.assign(size_t(cam.width) * cam.height, ambient);
  RigidTransform cam_from_world = inverse(camera_pose);
  for (const HeatSource& hs : scene.heat_sources) {
    Eigen::Vector3d pc = cam_from_world.apply(hs.position);
    if (pc.z() < 0.05) continue;
    double u = cam.fx * pc.x() / pc.z() + cam.cx;
    double v = cam.fy * pc.y() / pc.z() + cam.cy;
    double r = cam.fx * hs.radius / pc.z();
    uint16_t val = uint16_t(std::clamp(hs.temp_c * 100.0, 0.0, 65535.0));
    int x0 = std::max(0, int(std::floor(u - r))), x1 = std::min(cam.width - 1, int(std::ceil(u + r)));
    int y0 = std::max(0, int(std::floor(v - r))), y1 = std::min(cam.height - 1, int(std::ceil(v + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = x + 0.5 - u, dy = y + 0.5 - v;
        if (dx * dx + dy * dy <= r * r && img.at(x, y) < val) img.at(x, y) = val;
      }
  }
  return img;
}

// ---------------------------------------------------------------- scenes

Scene make_wall_scene(const Blueprint& bp, const RigidTransform& wall_frame, int built_count) {
  Scene s;
  s.frames["wall"] = wall_frame;
  auto bricks = blueprint_bricks(bp, "wall");
  if (built_count < 0 || built_count > int(bricks.size())) built_count = int(bricks.size());
  bricks.resize(built_count);
  s.bricks = std::move(bricks);
  return s;
}

Scene make_pile_scene(const LoadCount& counts, const RigidTransform& pile_frame,
                      const PileLayout& layout, uint64_t seed) {
  Scene s;
  s.frames["pile"] = pile_frame;
  Rng rng(seed);
  const std::pair<BrickType, int> rows[] = {{BrickType::red, counts.red},
                                            {BrickType::green, counts.green},
                                            {BrickType::blue, counts.blue},
                                            {BrickType::orange, counts.orange}};
  int id = 0;
  int row_i = 0;
  for (const auto& [type, count] : rows) {
    if (count <= 0) {
      ++row_i;
      continue;
    }
    double len = brick_length(type);
    double y = row_i * layout.row_gap;
    for (int k = 0; k < count; ++k) {
      int stack = k / layout.stack_height;
      int level = k % layout.stack_height;
      Brick b;
      b.id = id++;
      b.type = type;
      b.frame = "pile";
      double x = 0.5 * len + stack * (len + layout.along_gap);
      double jx = 0, jy = 0, jyaw = 0;
      if (layout.jitter_xy > 0 || layout.jitter_yaw > 0) {
        Rng j(rng.child(uint64_t(b.id)));
        jx = layout.jitter_xy * j.gaussian();
        jy = layout.jitter_xy * j.gaussian();
        jyaw = layout.jitter_yaw * j.gaussian();
      }
      b.pose = PlanarPose(x + jx, y + jy, jyaw);
      b.z_base = level * kBrickSide;
      s.bricks.push_back(b);
    }
    ++row_i;
  }
  return s;
}

}  // namespace brickyard
