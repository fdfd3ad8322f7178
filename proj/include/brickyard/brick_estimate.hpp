#pragma once
#include "brickyard/registration.hpp"

namespace brickyard {

// contact edges over brick ids; kGroundBody stands in for the ground plane
constexpr int kGroundBody = -1;

struct ContactGraph {
  std::vector<std::pair<int, int>> edges;  // id pairs, first < second
  std::vector<int> ground_bricks;          // ids resting on the ground
};

// face contact: every axis gap <= tol and at least two axes overlap by
// 1 cm. bricks and the plane share one frame; bricks axis-aligned-ish.
ContactGraph contact_graph(const std::vector<Brick>& bricks, const Plane& ground, double tol);

struct MultiBrickConfig {
  double lambda_dot = 0.8;   // minimum normal agreement
  double lambda_dist = 0.05; // maximum pair distance, meters
  double lambda_r = 1.0;     // pairwise rotation strength
  double lambda_t = 10.0;    // pairwise translation strength, per m^2
  double contact_tol = 0.01;
  bool free_z = false;       // unfreeze the vertical delta component
  int rounds = 5;            // re-association passes; iteration budget is
                             // solver.max_iterations split across them
  SolverConfig solver;
  RenderConfig render;
};

struct BrickEstimate {
  int id = 0;
  BrickType type = BrickType::red;
  PlanarPose pose;       // parent frame
  double z_base = 0.0;
  double confidence = 0.0;
  int pairs = 0;         // correspondences surviving both filters
  int expected = 0;      // rendered model points for this brick
};

void to_json(json& j, const BrickEstimate& e);
void from_json(const json& j, BrickEstimate& e);

// per-brick yaw+translation refinement against the scan. Bricks of
// model_scene in frame_id are re-rendered at rough_pose (ground included),
// included bricks get free deltas, everything else is frozen and anchors
// the contact terms. scan points and normals are in the scan's own frame.
// include empty = every brick in frame_id. Unobserved bricks come back
// with confidence 0 and the initial pose.
std::vector<BrickEstimate> estimate_bricks(const Scene& model_scene, const std::string& frame_id,
                                           const FrameEstimate& rough_pose,
                                           const PointCloud& scan, const std::vector<int>& include,
                                           const MultiBrickConfig& cfg,
                                           const RigidTransform& render_sensor,
                                           std::vector<SolveReport>* reports = nullptr);

// ids with confidence >= min_confidence, best first, ties by id
std::vector<int> pickable_bricks(const std::vector<BrickEstimate>& estimates,
                                 double min_confidence);

}  // namespace brickyard
