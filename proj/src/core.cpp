#include "brickyard/core.hpp"

#include <array>

namespace brickyard {

double brick_length(BrickType t) {
  switch (t) {
    case BrickType::red: return 0.30;
    case BrickType::green: return 0.60;
    case BrickType::blue: return 1.20;
    case BrickType::orange: return 1.80;
  }
  throw BadArgument("unknown brick type");
}

double brick_mass(BrickType t) {
  switch (t) {
    case BrickType::red: return 1.0;
    case BrickType::green: return 1.5;
    case BrickType::blue: return 1.5;
    case BrickType::orange: return 2.0;
  }
  throw BadArgument("unknown brick type");
}

const char* to_string(BrickType t) {
  switch (t) {
    case BrickType::red: return "red";
    case BrickType::green: return "green";
    case BrickType::blue: return "blue";
    case BrickType::orange: return "orange";
  }
  return "?";
}

BrickType brick_type_from_string(const std::string& s) {
  if (s == "red") return BrickType::red;
  if (s == "green") return BrickType::green;
  if (s == "blue") return BrickType::blue;
  if (s == "orange") return BrickType::orange;
  throw BadArgument("unknown brick type '" + s + "'");
}

PlanarPose compose(const PlanarPose& a, const PlanarPose& b) {
  double c = std::cos(a.yaw), s = std::sin(a.yaw);
  return PlanarPose(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.yaw + b.yaw);
}

PlanarPose inverse(const PlanarPose& p) {
  double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return PlanarPose(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.yaw);
}

Eigen::Vector2d apply(const PlanarPose& p, const Eigen::Vector2d& v) {
  double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return {p.x + c * v.x() - s * v.y(), p.y + s * v.x() + c * v.y()};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}

RigidTransform inverse(const RigidTransform& T) {
  RigidTransform out;
  out.R = T.R.transpose();
  out.t = -(out.R * T.t);
  return out;
}

Eigen::Matrix3d rot_z(double yaw) {
  double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix3d R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}

RigidTransform planar_to_rigid(const PlanarPose& p, double z) {
  return {rot_z(p.yaw), Eigen::Vector3d(p.x, p.y, z)};
}

PlanarPose rigid_to_planar(const RigidTransform& T) {
  return PlanarPose(T.t.x(), T.t.y(), std::atan2(T.R(1, 0), T.R(0, 0)));
}

std::array<Eigen::Vector2d, 4> brick_footprint(BrickType type, const PlanarPose& pose) {
  double hx = 0.5 * brick_length(type), hy = 0.5 * kBrickSide;
  std::array<Eigen::Vector2d, 4> local = {
      Eigen::Vector2d(hx, hy), Eigen::Vector2d(-hx, hy),
      Eigen::Vector2d(-hx, -hy), Eigen::Vector2d(hx, -hy)};
  std::array<Eigen::Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = apply(pose, local[i]);
  return out;
}

double layer_length(const std::vector<BrickType>& layer) {
  double sum = 0.0;
  for (BrickType t : layer) sum += brick_length(t);
  return sum;
}

void validate_blueprint(const Blueprint& bp, double tol) {
  if (bp.layers.empty()) throw MalformedBlueprint("no layers");
  for (const auto& layer : bp.layers)
    if (layer.empty()) throw MalformedBlueprint("empty layer");
  double base = layer_length(bp.layers[0]);
  for (size_t k = 1; k < bp.layers.size(); ++k) {
    double len = layer_length(bp.layers[k]);
    if (std::abs(len - base) > tol)
      throw MalformedBlueprint("layer " + std::to_string(k) + " length " +
                               std::to_string(len) + " != " + std::to_string(base));
  }
}

std::vector<std::vector<double>> blueprint_brick_centers(const Blueprint& bp) {
  validate_blueprint(bp);
  std::vector<std::vector<double>> centers(bp.layers.size());
  for (size_t k = 0; k < bp.layers.size(); ++k) {
    double x = 0.0;
    for (BrickType t : bp.layers[k]) {
      double len = brick_length(t);
      centers[k].push_back(x + 0.5 * len);
      x += len;
    }
  }
  return centers;
}

std::vector<Brick> blueprint_bricks(const Blueprint& bp, const std::string& frame) {
  auto centers = blueprint_brick_centers(bp);
  std::vector<Brick> out;
  int id = 0;
  for (size_t k = 0; k < bp.layers.size(); ++k) {
    for (size_t i = 0; i < bp.layers[k].size(); ++i) {
      Brick b;
      b.id = id++;
      b.type = bp.layers[k][i];
      b.pose = PlanarPose(centers[k][i], 0.0, 0.0);
      b.z_base = double(k) * kLayerHeight;
      b.frame = frame;
      out.push_back(b);
    }
  }
  return out;
}

int stack_limit(const StorageRack& rack, BrickType t) {
  switch (t) {
    case BrickType::red: return rack.red_per_bin;
    case BrickType::green: return rack.green_per_bin;
    case BrickType::blue: return rack.blue_per_bin;
    default: throw BadArgument("orange bricks are not binned");
  }
}

bool rack_admissible(const StorageRack& rack, const LoadCount& load, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = why;
    return false;
  };
  if (load.red < 0 || load.green < 0 || load.blue < 0 || load.orange < 0)
    return fail("negative count");
  if (load.orange > 0 && (load.red > 0 || load.green > 0 || load.blue > 0))
    return fail("orange bricks occupy the whole rack");
  if (load.orange > rack.orange_capacity) return fail("orange over capacity");
  // one compartment per small type
  int bins = rack.bins_per_compartment;
  if (load.red > bins * rack.red_per_bin) return fail("red over capacity");
  if (load.green > bins * rack.green_per_bin) return fail("green over capacity");
  if (load.blue > bins * rack.blue_per_bin) return fail("blue over capacity");
  if (reason) reason->clear();
  return true;
}

// ---------------------------------------------------------------- json

void to_json(json& j, const BrickType& t) { j = to_string(t); }
void from_json(const json& j, BrickType& t) { t = brick_type_from_string(j.get<std::string>()); }

void to_json(json& j, const PlanarPose& p) {
  j = json{{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}};
}
void from_json(const json& j, PlanarPose& p) {
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.yaw = j.at("yaw").get<double>();
}

void to_json(json& j, const RigidTransform& T) {
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[3 * i + k] = T.R(i, k);
  j = json{{"R", r}, {"t", {T.t.x(), T.t.y(), T.t.z()}}};
}
void from_json(const json& j, RigidTransform& T) {
  auto r = j.at("R").get<std::vector<double>>();
  auto t = j.at("t").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3) throw BadFile("bad transform");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) T.R(i, k) = r[3 * i + k];
  T.t = Eigen::Vector3d(t[0], t[1], t[2]);
}

void to_json(json& j, const Brick& b) {
  j = json{{"id", b.id}, {"type", b.type}, {"pose", b.pose},
           {"z_base", b.z_base}, {"frame", b.frame}};
}
void from_json(const json& j, Brick& b) {
  b.id = j.at("id").get<int>();
  b.type = j.at("type").get<BrickType>();
  b.pose = j.at("pose").get<PlanarPose>();
  b.z_base = j.value("z_base", 0.0);
  b.frame = j.value("frame", std::string("world"));
}

void to_json(json& j, const Blueprint& bp) { j = json{{"layers", bp.layers}}; }
void from_json(const json& j, Blueprint& bp) {
  bp.layers = j.at("layers").get<std::vector<std::vector<BrickType>>>();
}

void to_json(json& j, const StorageRack& r) {
  j = json{{"compartments", r.compartments},
           {"bins_per_compartment", r.bins_per_compartment},
           {"red_per_bin", r.red_per_bin},
           {"green_per_bin", r.green_per_bin},
           {"blue_per_bin", r.blue_per_bin},
           {"orange_capacity", r.orange_capacity}};
}
void from_json(const json& j, StorageRack& r) {
  r.compartments = j.at("compartments");
  r.bins_per_compartment = j.at("bins_per_compartment");
  r.red_per_bin = j.at("red_per_bin");
  r.green_per_bin = j.at("green_per_bin");
  r.blue_per_bin = j.at("blue_per_bin");
  r.orange_capacity = j.at("orange_capacity");
}

void to_json(json& j, const LoadCount& c) {
  j = json{{"red", c.red}, {"green", c.green}, {"blue", c.blue}, {"orange", c.orange}};
}
void from_json(const json& j, LoadCount& c) {
  c.red = j.at("red");
  c.green = j.at("green");
  c.blue = j.at("blue");
  c.orange = j.at("orange");
}

}  // namespace brickyard
