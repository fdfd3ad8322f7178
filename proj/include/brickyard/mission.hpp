#pragma once
#include "brickyard/brick_estimate.hpp"
#include "brickyard/marker.hpp"
#include "brickyard/pile.hpp"
#include "brickyard/plan.hpp"

namespace brickyard {

struct StorageSlot {
  int compartment = -1;  // -1 for the rack-level orange row
  int bin = -1;
  int level = -1;        // stack position inside the bin
  int orange_slot = -1;
};

void to_json(json& j, const StorageSlot& s);
void from_json(const json& j, StorageSlot& s);

struct StoragePlan {
  std::vector<std::pair<int, StorageSlot>> slots;  // brick id -> slot, pick order
};

// deterministic first-fit into type-dedicated compartments (red 0, green 1,
// blue 2); oranges go to numbered rack slots and exclude everything else
StoragePlan assign_storage(const std::vector<std::pair<int, BrickType>>& picks,
                           const StorageRack& rack = {});

struct MissionConfig {
  // perturbations applied to the nominal scene to make the true world
  double pile_jitter_xy = 0.02;
  double pile_jitter_yaw = 5.0 * M_PI / 180.0;
  // noise
  double odom_sigma_per_m = 0.0;
  double odom_yaw_sigma_per_m = 0.0;  // radians of heading drift per meter
  double arm_sigma_xy = 0.003;
  double arm_sigma_yaw = 0.5 * M_PI / 180.0;
  double scan_sigma = 0.005;
  double pixel_noise = 2.0;
  // pick model
  double pick_confidence = 0.3;
  double grip_tol_xy = 0.04;
  double grip_tol_yaw = 10.0 * M_PI / 180.0;
  // placement
  double place_tol = 0.05;
  bool orange_first = true;
  bool optimal_plan = true;
  // geometry
  double marker_standoff = 2.5;  // camera approach distance for the fit
  double camera_height = 1.2;
  double drive_speed = 1.0;      // m/s, clock only
  StorageRack rack;
  PileDetectConfig pile;
  MultiBrickConfig estimate;
  RegistrationConfig registration;
  MarkerFitConfig marker;
  ColorMaskConfig mask;
  CornerConfig corner;
  CameraModel camera;
  LidarModel lidar;
  PlannerConfig planner;
};

struct WorldState {
  Scene scene;  // ground truth; bricks move between pile and wall frames
  std::map<int, std::string> status;  // on_pile / stored / placed / lost
  std::map<int, StorageSlot> slots;
  PlanarPose robot;         // true pose
  PlanarPose robot_belief;  // odometry estimate
  StorageRack rack;
  LoadCount rack_load;
  std::string fsm = "idle";
  double clock = 0.0;
};

void to_json(json& j, const WorldState& w);
void from_json(const json& j, WorldState& w);

struct LogEntry {
  double t = 0.0;
  std::string state;
  std::string event;
  json payload;
};

using MissionLog = std::vector<LogEntry>;

std::string log_to_jsonl(const MissionLog& log);

struct MissionResult {
  MissionLog log;
  WorldState state;
  bool success = false;
  std::string failure;  // empty on success
  // (state name, snapshot bytes) captured at each state entry
  std::vector<std::pair<std::string, std::string>> snapshots;
};

// full pick-store-drive-register-place loop on a synthetic world derived
// from the nominal scene; every perception step runs the real pipelines on
// rendered data. scene needs a "pile" frame with bricks, a "wall" frame,
// and a marker at the wall frame's ground pose.
MissionResult run_mission(const Scene& nominal, const Blueprint& blueprint,
                          const MissionConfig& cfg, uint64_t seed);

// JSON-bytes snapshot of the world; restore throws CorruptSnapshot on
// anything that does not parse back
std::string snapshot(const WorldState& w);
WorldState restore(const std::string& bytes);

}  // namespace brickyard
