#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "brickyard/core.hpp"
#include "brickyard/rng.hpp"

using namespace brickyard;

TEST_CASE("brick dimensions and masses") {
  CHECK(brick_length(BrickType::red) == doctest::Approx(0.30));
  CHECK(brick_length(BrickType::green) == doctest::Approx(0.60));
  CHECK(brick_length(BrickType::blue) == doctest::Approx(1.20));
  CHECK(brick_length(BrickType::orange) == doctest::Approx(1.80));
  CHECK(brick_mass(BrickType::red) == doctest::Approx(1.0));
  CHECK(brick_mass(BrickType::green) == doctest::Approx(1.5));
  CHECK(brick_mass(BrickType::blue) == doctest::Approx(1.5));
  CHECK(brick_mass(BrickType::orange) == doctest::Approx(2.0));
  CHECK(kBrickSide == doctest::Approx(0.20));
  CHECK(kLayerHeight == doctest::Approx(0.20));
}

TEST_CASE("brick type names round-trip") {
  for (BrickType t : {BrickType::red, BrickType::green, BrickType::blue, BrickType::orange})
    CHECK(brick_type_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(brick_type_from_string("purple"), BadArgument);
}

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
  CHECK(normalize_angle(0.0) == doctest::Approx(0.0));
  CHECK(normalize_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(3 * M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(2 * M_PI + 0.25) == doctest::Approx(0.25));
  CHECK(normalize_angle(-7.5 * M_PI) == doctest::Approx(0.5 * M_PI));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    double a = (rng.uniform() - 0.5) * 50.0;
    double w = normalize_angle(a);
    CHECK(w > -M_PI);
    CHECK(w <= M_PI);
    // same direction
    CHECK(std::abs(std::sin(w) - std::sin(a)) < 1e-9);
    CHECK(std::abs(std::cos(w) - std::cos(a)) < 1e-9);
  }
}

TEST_CASE("planar pose algebra") {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    PlanarPose a(rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 8 - 4);
    PlanarPose b(rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 8 - 4);
    PlanarPose c(rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 8 - 4);

    // associativity
    PlanarPose ab_c = compose(compose(a, b), c);
    PlanarPose a_bc = compose(a, compose(b, c));
    CHECK(ab_c.x == doctest::Approx(a_bc.x).epsilon(1e-9));
    CHECK(ab_c.y == doctest::Approx(a_bc.y).epsilon(1e-9));
    CHECK(normalize_angle(ab_c.yaw - a_bc.yaw) == doctest::Approx(0.0));

    // inverse
    PlanarPose e = compose(a, inverse(a));
    CHECK(e.x == doctest::Approx(0.0));
    CHECK(e.y == doctest::Approx(0.0));
    CHECK(e.yaw == doctest::Approx(0.0));

    // apply matches compose with a pure translation
    Eigen::Vector2d v(rng.uniform(), rng.uniform());
    Eigen::Vector2d via_apply = apply(a, v);
    PlanarPose via_compose = compose(a, PlanarPose(v.x(), v.y(), 0));
    CHECK(via_apply.x() == doctest::Approx(via_compose.x));
    CHECK(via_apply.y() == doctest::Approx(via_compose.y));
  }

  // identity composes trivially
  PlanarPose p(1.0, -2.0, 0.7);
  PlanarPose q = compose(PlanarPose(), p);
  CHECK(q.x == doctest::Approx(p.x));
  CHECK(q.y == doctest::Approx(p.y));
  CHECK(q.yaw == doctest::Approx(p.yaw));
}

TEST_CASE("rigid transform algebra and planar embedding") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    PlanarPose p(rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 8 - 4);
    double z = rng.uniform() * 2 - 1;
    RigidTransform T = planar_to_rigid(p, z);

    // R is a rotation
    CHECK((T.R * T.R.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(T.R.determinant() == doctest::Approx(1.0));
    CHECK(T.t.z() == doctest::Approx(z));

    PlanarPose back = rigid_to_planar(T);
    CHECK(back.x == doctest::Approx(p.x));
    CHECK(back.y == doctest::Approx(p.y));
    CHECK(normalize_angle(back.yaw - p.yaw) == doctest::Approx(0.0));

    // planar compose commutes with the embedding
    PlanarPose q(rng.uniform(), rng.uniform(), rng.uniform() * 4);
    RigidTransform TQ = compose(T, planar_to_rigid(q));
    PlanarPose pq = compose(p, q);
    CHECK(TQ.t.x() == doctest::Approx(pq.x));
    CHECK(TQ.t.y() == doctest::Approx(pq.y));

    // inverse undoes apply
    Eigen::Vector3d v(rng.uniform(), rng.uniform(), rng.uniform());
    Eigen::Vector3d w = inverse(T).apply(T.apply(v));
    CHECK((w - v).norm() < 1e-12);
  }
  CHECK(rot_z(0.5).isApprox(planar_to_rigid(PlanarPose(0, 0, 0.5)).R));
}

TEST_CASE("brick footprint is counter-clockwise and sized by type") {
  PlanarPose pose(2.0, 1.0, 0.3);
  auto fp = brick_footprint(BrickType::blue, pose);

  // shoelace area, positive for CCW
  double area = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = fp[i];
    const auto& b = fp[(i + 1) % 4];
    area += a.x() * b.y() - b.x() * a.y();
  }
  area *= 0.5;
  CHECK(area == doctest::Approx(1.20 * 0.20));

  // centroid lands on the pose
  Eigen::Vector2d c = (fp[0] + fp[1] + fp[2] + fp[3]) / 4.0;
  CHECK(c.x() == doctest::Approx(2.0));
  CHECK(c.y() == doctest::Approx(1.0));

  // side lengths
  CHECK((fp[0] - fp[1]).norm() == doctest::Approx(1.20));
  CHECK((fp[1] - fp[2]).norm() == doctest::Approx(0.20));
}

TEST_CASE("blueprint validation") {
  Blueprint ok;
  ok.layers = {{BrickType::red, BrickType::green},   // 0.9
               {BrickType::red, BrickType::red, BrickType::red}};  // 0.9
  CHECK_NOTHROW(validate_blueprint(ok));

  Blueprint empty;
  CHECK_THROWS_AS(validate_blueprint(empty), MalformedBlueprint);

  Blueprint hole;
  hole.layers = {{BrickType::red}, {}};
  CHECK_THROWS_AS(validate_blueprint(hole), MalformedBlueprint);

  Blueprint ragged;
  ragged.layers = {{BrickType::red}, {BrickType::green}};
  CHECK_THROWS_AS(validate_blueprint(ragged), MalformedBlueprint);
}

TEST_CASE("blueprint centers and model bricks") {
  Blueprint bp;
  bp.layers = {{BrickType::green, BrickType::red, BrickType::red},
               {BrickType::red, BrickType::green, BrickType::red}};
  auto centers = blueprint_brick_centers(bp);
  REQUIRE(centers.size() == 2);
  CHECK(centers[0][0] == doctest::Approx(0.30));
  CHECK(centers[0][1] == doctest::Approx(0.75));
  CHECK(centers[0][2] == doctest::Approx(1.05));
  CHECK(centers[1][0] == doctest::Approx(0.15));
  CHECK(centers[1][1] == doctest::Approx(0.60));
  CHECK(centers[1][2] == doctest::Approx(1.05));

  auto bricks = blueprint_bricks(bp, "wall");
  REQUIRE(bricks.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(bricks[i].id == i);  // layer-major ids
  CHECK(bricks[0].type == BrickType::green);
  CHECK(bricks[3].z_base == doctest::Approx(kLayerHeight));
  CHECK(bricks[3].pose.x == doctest::Approx(0.15));
  CHECK(bricks[0].frame == "wall");
  for (const auto& b : bricks) {
    CHECK(b.pose.y == doctest::Approx(0.0));
    CHECK(b.pose.yaw == doctest::Approx(0.0));
  }
}

TEST_CASE("storage rack capacity rules") {
  StorageRack rack;  // 3 compartments x 5 bins, 4/2/1 per bin, 10 orange
  CHECK(stack_limit(rack, BrickType::red) == 4);
  CHECK(stack_limit(rack, BrickType::green) == 2);
  CHECK(stack_limit(rack, BrickType::blue) == 1);
  CHECK_THROWS_AS(stack_limit(rack, BrickType::orange), BadArgument);

  std::string why;
  CHECK(rack_admissible(rack, {20, 10, 5, 0}, &why));
  CHECK(why.empty());
  CHECK_FALSE(rack_admissible(rack, {21, 0, 0, 0}, &why));
  CHECK(why == "red over capacity");
  CHECK_FALSE(rack_admissible(rack, {0, 11, 0, 0}));
  CHECK_FALSE(rack_admissible(rack, {0, 0, 6, 0}));
  CHECK(rack_admissible(rack, {0, 0, 0, 10}));
  CHECK_FALSE(rack_admissible(rack, {0, 0, 0, 11}, &why));
  CHECK(why == "orange over capacity");

  // orange excludes everything else
  CHECK_FALSE(rack_admissible(rack, {1, 0, 0, 1}, &why));
  CHECK(why == "orange bricks occupy the whole rack");
  CHECK_FALSE(rack_admissible(rack, {-1, 0, 0, 0}));

  CHECK(rack_admissible(rack, {0, 0, 0, 0}));
}

TEST_CASE("core json round-trips") {
  PlanarPose p(1.25, -0.5, 0.75);
  PlanarPose p2 = json(p).get<PlanarPose>();
  CHECK(p2.x == p.x);
  CHECK(p2.y == p.y);
  CHECK(p2.yaw == p.yaw);

  RigidTransform T = planar_to_rigid(p, 0.4);
  RigidTransform T2 = json(T).get<RigidTransform>();
  CHECK((T2.R - T.R).norm() == 0.0);
  CHECK((T2.t - T.t).norm() == 0.0);

  Brick b{7, BrickType::orange, PlanarPose(3, 1, 0.1), 0.2, "pile"};
  Brick b2 = json(b).get<Brick>();
  CHECK(b2.id == 7);
  CHECK(b2.type == BrickType::orange);
  CHECK(b2.frame == "pile");
  CHECK(b2.z_base == 0.2);

  Blueprint bp;
  bp.layers = {{BrickType::red, BrickType::blue}, {BrickType::green, BrickType::red,
                BrickType::red, BrickType::red}};
  Blueprint bp2 = json(bp).get<Blueprint>();
  CHECK(bp2.layers == bp.layers);

  StorageRack r;
  r.orange_capacity = 7;
  StorageRack r2 = json(r).get<StorageRack>();
  CHECK(r2.orange_capacity == 7);
  CHECK(r2.bins_per_compartment == r.bins_per_compartment);

  LoadCount c{1, 2, 3, 0};
  LoadCount c2 = json(c).get<LoadCount>();
  CHECK(c2.total() == 6);

  // brick defaults fill in
  Brick d = json{{"id", 1}, {"type", "red"}, {"pose", json(PlanarPose())}}.get<Brick>();
  CHECK(d.frame == "world");
  CHECK(d.z_base == 0.0);
}
