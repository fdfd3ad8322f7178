#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "brickyard/registration.hpp"
#include "brickyard/rng.hpp"

using namespace brickyard;

namespace {

Scene three_brick_scene(const RigidTransform& frame) {
  // asymmetric arrangement so the fit has a unique answer
  Scene s;
  s.frames["pile"] = frame;
  s.bricks.push_back({0, BrickType::blue, PlanarPose(0, 0, 0), 0.0, "pile"});
  s.bricks.push_back({1, BrickType::green, PlanarPose(0.4, 0.6, 0.8), 0.0, "pile"});
  s.bricks.push_back({2, BrickType::red, PlanarPose(-0.3, 0.4, 0.3), 0.2, "pile"});
  return s;
}

PointCloud lidar_of(const Scene& scene, const Eigen::Vector3d& target, double sigma,
                    uint64_t seed) {
  auto traj = arc_trajectory(target, 4.0, 1.3, 3);
  LidarModel lm;
  lm.azimuth_step = 0.4 * M_PI / 180.0;
  lm.sigma_range = sigma;
  return simulate_lidar_scan(scene, traj, lm, seed);
}

}  // namespace

TEST_CASE("preprocess_scan crops, strips the ground, and adds normals") {
  Scene sc = three_brick_scene(RigidTransform::identity());
  PointCloud scan = lidar_of(sc, {0, 0.3, 0}, 0.0, 3);
  REQUIRE(scan.size() > 1000);

  RegistrationConfig cfg;
  cfg.crop_half_extent = 2.0;
  Eigen::Vector3d viewpoint(-4, 0.3, 1.3);
  PointCloud out = preprocess_scan(scan, {0, 0.3, 0}, cfg, viewpoint, 1, true);
  REQUIRE(out.size() > 50);
  REQUIRE(out.has_normals());
  for (const auto& p : out.points) {
    CHECK(std::abs(p.x()) <= 2.0 + 1e-9);
    CHECK(p.z() > 0.005);  // ground rows are gone
  }

  // keeping the ground leaves near-zero-height points in place
  PointCloud with_ground = preprocess_scan(scan, {0, 0.3, 0}, cfg, viewpoint, 1, false);
  int low = 0;
  for (const auto& p : with_ground.points) low += (p.z() < 0.005);
  CHECK(low > 100);
  CHECK(with_ground.size() > out.size());

  CHECK_THROWS_AS(preprocess_scan(PointCloud{}, {0, 0, 0}, cfg, viewpoint, 1), EmptyCloud);
  CHECK_THROWS_AS(preprocess_scan(scan, {500, 500, 0}, cfg, viewpoint, 1), EmptyAfterCrop);
}

TEST_CASE("rough_align recovers a small offset exactly on clean data") {
  Scene sc = three_brick_scene(RigidTransform::identity());
  RigidTransform sensor;
  sensor.t = {0, -3, 1.5};
  RenderConfig rc;
  PointCloud model = render_model_cloud(sc, sensor, rc);
  REQUIRE(model.size() > 100);

  RigidTransform truth = planar_to_rigid(PlanarPose(0.2, 0.12, 0.15));
  PointCloud moved;
  moved.points.reserve(model.size());
  for (const auto& p : model.points) moved.points.push_back(truth.apply(p));
  PointCloud scan = estimate_normals(moved, 16, truth.apply(sensor.t));

  RegistrationConfig cfg;
  std::vector<SolveReport> reports;
  FrameEstimate est = rough_align(model, scan, RigidTransform::identity(), cfg, {},
                                  Eigen::Vector3d::UnitX(), &reports);
  CHECK(est.converged);
  CHECK((est.pose.t - truth.t).norm() < 1e-4);
  CHECK((est.pose.R - truth.R).norm() < 1e-4);
  CHECK(est.pairs >= int(model.size()) / 2);
  CHECK(reports.size() >= 2);  // at least one solve per stage
  for (const auto& rep : reports) {
    CHECK(rep.final_cost <= rep.initial_cost);
    for (size_t i = 1; i < rep.cost_trace.size(); ++i)
      CHECK(rep.cost_trace[i] <= rep.cost_trace[i - 1]);
  }

  CHECK_THROWS_AS(rough_align(PointCloud{}, scan, RigidTransform::identity(), cfg), EmptyCloud);
  CHECK_THROWS_AS(rough_align(model, moved, RigidTransform::identity(), cfg), BadArgument);

  // displaced far beyond the association distance
  PointCloud far = scan;
  for (auto& p : far.points) p.x() += 50.0;
  CHECK_THROWS_AS(rough_align(model, far, RigidTransform::identity(), cfg), NoCorrespondences);
}

TEST_CASE("register_target refines a perturbed initial frame") {
  RigidTransform truth = planar_to_rigid(PlanarPose(1.0, -0.5, 0.25));
  Scene world = three_brick_scene(truth);
  Eigen::Vector3d look = truth.apply(Eigen::Vector3d(0, 0.3, 0));
  PointCloud scan = lidar_of(world, look, 0.01, 11);

  Scene model = three_brick_scene(RigidTransform::identity());  // frame gets re-seated
  RigidTransform init = planar_to_rigid(PlanarPose(1.25, -0.3, 0.12));
  RigidTransform sensor;
  sensor.t = look + Eigen::Vector3d(-4, 0, 1.3);

  RegistrationConfig cfg;
  FrameEstimate est = register_target(model, "pile", scan, init, cfg, sensor, 21);
  CHECK(est.converged);
  PlanarPose got = rigid_to_planar(est.pose);
  PlanarPose want = rigid_to_planar(truth);
  CHECK(std::abs(got.x - want.x) < 0.02);
  CHECK(std::abs(got.y - want.y) < 0.02);
  CHECK(std::abs(normalize_angle(got.yaw - want.yaw)) < 2.0 * M_PI / 180.0);

  // same inputs, same bits
  FrameEstimate again = register_target(model, "pile", scan, init, cfg, sensor, 21);
  CHECK(est.pose.t == again.pose.t);
  CHECK(est.pose.R == again.pose.R);
  CHECK(est.cost == again.cost);
}

TEST_CASE("direction prior keeps the heading when geometry is ambiguous") {
  // a single lone brick is yaw-symmetric under 180 degrees; the prior
  // should pick the branch along +X
  Scene sc;
  sc.frames["pile"] = RigidTransform::identity();
  sc.bricks.push_back({0, BrickType::blue, PlanarPose(0, 0, 0), 0.0, "pile"});
  RigidTransform sensor;
  sensor.t = {0, -3, 1.5};
  PointCloud model = render_model_cloud(sc, sensor, {});

  PointCloud scan = estimate_normals(model, 16, sensor.t);
  RegistrationConfig cfg;
  std::optional<Eigen::Vector2d> dir(Eigen::Vector2d(1.0, 0.0));
  FrameEstimate est = rough_align(model, scan, RigidTransform::identity(), cfg, dir);
  CHECK(est.converged);
  // identity is compatible with the prior, so the answer stays put
  CHECK(est.pose.t.norm() < 1e-3);
  CHECK(std::abs(rigid_to_planar(est.pose).yaw) < 0.02);
}

TEST_CASE("frame estimate json round-trip") {
  FrameEstimate e;
  e.pose = planar_to_rigid(PlanarPose(0.5, 1.5, -0.4), 0.1);
  e.cost = 0.0123;
  e.pairs = 321;
  e.converged = true;
  FrameEstimate back = json(e).get<FrameEstimate>();
  CHECK(back.pairs == 321);
  CHECK(back.converged);
  CHECK(back.cost == doctest::Approx(e.cost));
  CHECK((back.pose.t - e.pose.t).norm() == 0.0);
}
