#pragma once
#include "brickyard/cloud.hpp"

namespace brickyard {

struct Geofence {
  double x_min = -1e9, x_max = 1e9, y_min = -1e9, y_max = 1e9;
};

struct PileDetectConfig {
  double voxel = 0.02;         // <= 0 skips the downsample
  double ransac_inlier = 0.02;
  int ransac_iters = 200;
  double ground_clear = 0.05;  // points closer to the ground are dropped
  double link_dist = 0.10;
  int min_cluster = 30;
  double extent_tol = 0.30;    // fractional, per axis
};

struct PileHypothesis {
  RigidTransform frame;        // X = principal axis on the ground, Z = ground normal
  Eigen::Vector3d extent = Eigen::Vector3d::Zero();
  int score = 0;               // cluster point count
  Plane ground;
};

void to_json(json& j, const PileHypothesis& p);
void from_json(const json& j, PileHypothesis& p);

// geofence -> ground RANSAC -> clearance cut -> clustering -> extent gate
// -> biggest surviving cluster
PileHypothesis detect_pile(const PointCloud& scan, const Geofence& fence,
                           const Eigen::Vector3d& expected_extent, const PileDetectConfig& cfg,
                           uint64_t seed);

}  // namespace brickyard
