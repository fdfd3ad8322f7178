#pragma once
#include <map>
#include <optional>
#include <vector>

#include "brickyard/cloud.hpp"
#include "brickyard/core.hpp"

namespace brickyard {

// box axes along the columns of pose.R
struct OrientedBox {
  RigidTransform pose;
  Eigen::Vector3d half = Eigen::Vector3d::Zero();
};

// flat L on the ground: leg A along marker +X (length leg_a), leg B along
// +Y (length leg_b), both of the given width, striped every stripe meters
struct MarkerSpec {
  PlanarPose pose;
  double leg_a = 1.5;
  double leg_b = 1.0;
  double width = 0.3;
  double stripe = 0.1;
};

struct HeatSource {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double radius = 0.075;  // apparent disk radius, meters
  double temp_c = 150.0;
};

constexpr int kLabelGround = -1;
constexpr int kLabelDistractor = -2;

struct Scene {
  Plane ground;  // z = 0 by default
  bool has_ground = true;
  std::map<std::string, RigidTransform> frames;  // name -> world-from-frame
  std::vector<Brick> bricks;
  std::vector<OrientedBox> distractors;  // world frame
  std::optional<MarkerSpec> marker;      // world frame, on the ground
  std::vector<MarkerSpec> fake_markers;  // off-spec lookalikes
  std::vector<HeatSource> heat_sources;
  double ambient_c = 30.0;

  RigidTransform frame(const std::string& name) const;
  OrientedBox brick_box(const Brick& b) const;  // world frame
};

void to_json(json& j, const Scene& s);
void from_json(const json& j, Scene& s);

// ---------------------------------------------------------------- rays

struct RayHit {
  double t = 0.0;
  int label = 0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // faces the ray origin
};

// first surface along origin + t*dir; boxes are bricks (label = id),
// distractors (-2) and optionally the ground (-1)
class SceneGeometry {
 public:
  SceneGeometry(const Scene& scene, bool include_ground, bool include_distractors);
  std::optional<RayHit> cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                             double t_max = 1e9) const;
  const std::vector<std::pair<OrientedBox, int>>& boxes() const { return boxes_; }
  bool has_ground() const { return ground_.has_value(); }

 private:
  std::vector<std::pair<OrientedBox, int>> boxes_;
  std::optional<Plane> ground_;
};

struct RenderConfig {
  double angular_step = 0.2 * M_PI / 180.0;
  double voxel = 0.02;
  bool include_ground = false;
  double window_margin = 0.26;  // radians added around the target window
};

// raw angular-grid ray cast over the scene's bricks (+ ground if asked),
// exact surface points with face normals and source labels
PointCloud raycast_model(const Scene& scene, const RigidTransform& sensor,
                         const RenderConfig& cfg = {});

// raycast_model followed by the voxel downsample; throws EmptyView when
// nothing is hit
PointCloud render_model_cloud(const Scene& scene, const RigidTransform& sensor,
                              const RenderConfig& cfg = {});

// ---------------------------------------------------------------- lidar

struct LidarModel {
  int rings = 16;
  double elevation_min = -15.0 * M_PI / 180.0;
  double elevation_step = 2.0 * M_PI / 180.0;
  double azimuth_step = 0.2 * M_PI / 180.0;
  double max_range = 30.0;
  double sigma_range = 0.0;  // gaussian range noise along the ray
};

// returns are in the world frame; range noise is applied along the ray and
// is a pure function of (seed, ray index)
PointCloud simulate_lidar_scan(const Scene& scene, const std::vector<RigidTransform>& trajectory,
                               const LidarModel& model, uint64_t seed);

// n poses on an arc of the given radius around `target`, sensor at `height`,
// looking at the target point
std::vector<RigidTransform> arc_trajectory(const Eigen::Vector3d& target, double radius,
                                           double height, int n, double arc_span = 0.5);

// ---------------------------------------------------------------- images

struct CameraModel {
  double fx = 500, fy = 500, cx = 320, cy = 240;
  int width = 640, height = 480;
};

struct Image8 {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel
  uint8_t* at(int x, int y) { return rgb.data() + 3 * (size_t(y) * width + x); }
  const uint8_t* at(int x, int y) const { return rgb.data() + 3 * (size_t(y) * width + x); }
};

struct Image16 {
  int width = 0, height = 0;
  std::vector<uint16_t> gray;
  uint16_t& at(int x, int y) { return gray[size_t(y) * width + x]; }
  uint16_t at(int x, int y) const { return gray[size_t(y) * width + x]; }
};

void save_ppm(const std::string& path, const Image8& img);
Image8 load_ppm(const std::string& path);
// 16-bit big-endian P5, values in centi-degrees C
void save_pgm16(const std::string& path, const Image16& img);
Image16 load_pgm16(const std::string& path);

// camera convention: +Z forward, +X right, +Y down; pose = world-from-camera.
// renders ground + marker(s); throws MarkerNotVisible when the scene has a
// marker but no pixel of it lands in the image
Image8 synth_marker_image(const Scene& scene, const RigidTransform& camera_pose,
                          const CameraModel& cam, double pixel_noise = 0.0, uint64_t seed = 0);

// ambient field + one filled disk per heat source (apparent radius f*R/z)
Image16 synth_thermal_image(const Scene& scene, const RigidTransform& camera_pose,
                            const CameraModel& cam);

// ---------------------------------------------------------------- scenes

// wall at the given frame, first built_count bricks placed (-1 for all)
Scene make_wall_scene(const Blueprint& bp, const RigidTransform& wall_frame,
                      int built_count = -1);

struct PileLayout {
  double row_gap = 0.8;     // y distance between type rows
  double along_gap = 0.10;  // x gap between stacks in a row
  int stack_height = 2;     // bricks per stack
  double jitter_xy = 0.0;
  double jitter_yaw = 0.0;
};

// type rows of stacked bricks in the pile frame (+ ground), deterministic
// per seed; brick ids start at 0
Scene make_pile_scene(const LoadCount& counts, const RigidTransform& pile_frame,
                      const PileLayout& layout, uint64_t seed);

}  // namespace brickyard
