#pragma once
#include <optional>

#include "brickyard/cloud.hpp"
#include "brickyard/nls.hpp"
#include "brickyard/synth.hpp"

namespace brickyard {

struct RegistrationConfig {
  double crop_half_extent = 0.0;   // <= 0: model bounding radius + 1.0
  double voxel = 0.02;
  int normal_k = 16;
  double ransac_inlier = 0.02;
  int ransac_iters = 200;
  double initial_corr_dist = 1.5;  // first association rounds, halves per round
  double rough_corr_dist = 0.50;
  double fine_corr_dist = 0.05;
  int max_rounds = 10;             // association rounds per stage
  int min_pairs = 10;
  double dir_weight = 10.0;
  double converged_rms = 0.05;     // fine-stage gate on mean pair distance
  SolverConfig solver;
};

struct FrameEstimate {
  RigidTransform pose;
  double cost = 0.0;
  int pairs = 0;
  bool converged = false;
};

void to_json(json& j, const FrameEstimate& e);
void from_json(const json& j, FrameEstimate& e);

// crop cube -> voxel downsample -> drop the dominant plane (skipped when no
// plane is found) -> normals toward the viewpoint
PointCloud preprocess_scan(const PointCloud& scan, const Eigen::Vector3d& crop_center,
                           const RegistrationConfig& cfg, const Eigen::Vector3d& viewpoint,
                           uint64_t seed, bool remove_ground = true);

// two-stage alignment of model onto scan starting from init: a coarse grid
// search around init seats the pose in the right basin, then point-to-plane
// rounds at a decaying association distance, then point-to-point at the fine
// distance. The recovered delta is planar (yaw plus ground translation);
// vertical offset and tilt are not estimated, matching targets that stand on
// the ground. scan needs normals. model_x: direction (pre-delta) tied to the
// marker front line when marker_direction is given.
FrameEstimate rough_align(const PointCloud& model, const PointCloud& scan,
                          const RigidTransform& init, const RegistrationConfig& cfg,
                          const std::optional<Eigen::Vector2d>& marker_direction = {},
                          const Eigen::Vector3d& model_x = Eigen::Vector3d::UnitX(),
                          std::vector<SolveReport>* reports = nullptr);

// full pipeline: place the model frame at init, render it from
// render_sensor, preprocess the scan around init, align; returns the
// refined world-from-model transform
FrameEstimate register_target(const Scene& model_scene, const std::string& model_frame,
                              const PointCloud& scan, const RigidTransform& init,
                              const RegistrationConfig& cfg,
                              const RigidTransform& render_sensor, uint64_t seed,
                              const std::optional<Eigen::Vector2d>& marker_direction = {},
                              std::vector<SolveReport>* reports = nullptr);

}  // namespace brickyard
