#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "brickyard/errors.hpp"
#include <json.hpp>

namespace brickyard {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- bricks

enum class BrickType { red, green, blue, orange };

constexpr double kBrickSide = 0.20;   // cross-section, both axes
constexpr double kLayerHeight = 0.20;

double brick_length(BrickType t);
double brick_mass(BrickType t);
const char* to_string(BrickType t);
BrickType brick_type_from_string(const std::string& s);

// ---------------------------------------------------------------- poses

// wraps into (-pi, pi]
inline double normalize_angle(double a) {
  double y = std::remainder(a, 2.0 * M_PI);
  if (y <= -M_PI) y += 2.0 * M_PI;
  return y;
}

struct PlanarPose {
  double x = 0.0, y = 0.0, yaw = 0.0;
  PlanarPose() = default;
  PlanarPose(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}
};

PlanarPose compose(const PlanarPose& a, const PlanarPose& b);
PlanarPose inverse(const PlanarPose& p);
Eigen::Vector2d apply(const PlanarPose& p, const Eigen::Vector2d& v);

struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return R * p + t; }
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& T);
RigidTransform planar_to_rigid(const PlanarPose& p, double z = 0.0);
PlanarPose rigid_to_planar(const RigidTransform& T);
Eigen::Matrix3d rot_z(double yaw);

// ---------------------------------------------------------------- model

struct Brick {
  int id = 0;
  BrickType type = BrickType::red;
  PlanarPose pose;          // in the parent frame named below
  double z_base = 0.0;      // bottom face height above the parent frame XY plane
  std::string frame = "world";
};

// corners of the brick outline in the parent frame, counter-clockwise
std::array<Eigen::Vector2d, 4> brick_footprint(BrickType type, const PlanarPose& pose);

struct Blueprint {
  std::vector<std::vector<BrickType>> layers;  // bottom layer first, left to right
};

// throws MalformedBlueprint: empty layers, or layer lengths that disagree
void validate_blueprint(const Blueprint& bp, double tol = 1e-6);
double layer_length(const std::vector<BrickType>& layer);

// x coordinate of each brick center, per layer, left edge of layer 0 at x=0
std::vector<std::vector<double>> blueprint_brick_centers(const Blueprint& bp);

// all bricks of a blueprint as model bricks in the wall frame
std::vector<Brick> blueprint_bricks(const Blueprint& bp, const std::string& frame = "wall");

// ---------------------------------------------------------------- storage

struct StorageRack {
  int compartments = 3;
  int bins_per_compartment = 5;
  int red_per_bin = 4;
  int green_per_bin = 2;
  int blue_per_bin = 1;
  int orange_capacity = 10;  // rack-level, not mixable with binned types
};

struct LoadCount {
  int red = 0, green = 0, blue = 0, orange = 0;
  int total() const { return red + green + blue + orange; }
};

int stack_limit(const StorageRack& rack, BrickType t);

// true iff the load fits; reason explains a rejection
bool rack_admissible(const StorageRack& rack, const LoadCount& load, std::string* reason = nullptr);

// ---------------------------------------------------------------- json

void to_json(json& j, const BrickType& t);
void from_json(const json& j, BrickType& t);
void to_json(json& j, const PlanarPose& p);
void from_json(const json& j, PlanarPose& p);
void to_json(json& j, const RigidTransform& T);
void from_json(const json& j, RigidTransform& T);
void to_json(json& j, const Brick& b);
void from_json(const json& j, Brick& b);
void to_json(json& j, const Blueprint& bp);
void from_json(const json& j, Blueprint& bp);
void to_json(json& j, const StorageRack& r);
void from_json(const json& j, StorageRack& r);
void to_json(json& j, const LoadCount& c);
void from_json(const json& j, LoadCount& c);

}  // namespace brickyard
