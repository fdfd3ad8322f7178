#include "brickyard/brick_estimate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "brickyard/errors.hpp"
#include "brickyard/parallel.hpp"
#include "brickyard/residuals.hpp"

namespace brickyard {

ContactGraph contact_graph(const std::vector<Brick>& bricks, const Plane& ground, double tol) {
  struct Box3 {
    Eigen::Vector3d lo, hi;
  };
  std::vector<Box3> boxes(bricks.size());
  for (size_t i = 0; i < bricks.size(); ++i) {
    auto fp = brick_footprint(bricks[i].type, bricks[i].pose);
    Eigen::Vector2d lo2 = fp[0], hi2 = fp[0];
    for (const auto& c : fp) {
      lo2 = lo2.cwiseMin(c);
      hi2 = hi2.cwiseMax(c);
    }
    boxes[i].lo = Eigen::Vector3d(lo2.x(), lo2.y(), bricks[i].z_base);
    boxes[i].hi = Eigen::Vector3d(hi2.x(), hi2.y(), bricks[i].z_base + kBrickSide);
  }

  ContactGraph g;
  for (size_t i = 0; i < bricks.size(); ++i) {
    for (size_t j = i + 1; j < bricks.size(); ++j) {
      bool touch = true;
      int overlapping = 0;
      for (int a = 0; a < 3 && touch; ++a) {
        double gap = std::max(boxes[i].lo[a] - boxes[j].hi[a], boxes[j].lo[a] - boxes[i].hi[a]);
        if (gap > tol) touch = false;
        if (-gap >= 0.01) ++overlapping;
      }
      if (touch && overlapping >= 2) {
        int a = std::min(bricks[i].id, bricks[j].id);
        int b = std::max(bricks[i].id, bricks[j].id);
        g.edges.emplace_back(a, b);
      }
    }
    Eigen::Vector3d base(bricks[i].pose.x, bricks[i].pose.y, bricks[i].z_base);
    if (std::abs(signed_distance(ground, base)) <= tol) g.ground_bricks.push_back(bricks[i].id);
  }
  std::sort(g.edges.begin(), g.edges.end());
  std::sort(g.ground_bricks.begin(), g.ground_bricks.end());
  return g;
}

void to_json(json& j, const BrickEstimate& e) {
  j = json{{"id", e.id},          {"type", e.type},
           {"pose", e.pose},      {"z_base", e.z_base},
           {"confidence", e.confidence}, {"pairs", e.pairs},
           {"expected", e.expected}};
}

void from_json(const json& j, BrickEstimate& e) {
  e.id = j.at("id");
  e.type = j.at("type");
  e.pose = j.at("pose");
  e.z_base = j.at("z_base");
  e.confidence = j.at("confidence");
  e.pairs = j.at("pairs");
  e.expected = j.at("expected");
}

namespace {

struct Body {
  Brick brick;
  RigidTransform T;         // parent-from-brick at initialization
  Eigen::Vector3d center;   // box center, parent frame
  bool free = false;
  int block = -1;
  std::vector<int> model_idx;  // rendered points labeled with this brick
};

// association under the current delta; returns (model point, scan index)
std::vector<std::pair<int, int>> associate_brick(
    const Body& body, const Eigen::Vector4d& delta, const RigidTransform& world_from_parent,
    const std::vector<Eigen::Vector3d>& model_pts, const std::vector<Eigen::Vector3d>& model_nrm,
    const PointCloud& scan, const KdTree& tree, double lambda_dist, double lambda_dot) {
  Eigen::Matrix3d Rz = rot_z(delta(0));
  Eigen::Vector3d t = delta.tail<3>();
  std::vector<std::pair<int, int>> out(body.model_idx.size(), {-1, -1});
  parallel_for(int64_t(body.model_idx.size()), [&](int64_t k) {
    int mi = body.model_idx[k];
    Eigen::Vector3d pp = Rz * (model_pts[mi] - body.center) + body.center + t;
    Eigen::Vector3d pw = world_from_parent.R * pp + world_from_parent.t;
    int s = tree.nearest(pw, lambda_dist);
    if (s < 0) return;
    Eigen::Vector3d nw = world_from_parent.R * (Rz * model_nrm[mi]);
    if (nw.dot(scan.normals[s]) < lambda_dot) return;
    out[k] = {mi, s};
  });
  std::vector<std::pair<int, int>> pairs;
  for (const auto& pr : out)
    if (pr.first >= 0) pairs.push_back(pr);
  return pairs;
}

}  // namespace

std::vector<BrickEstimate> estimate_bricks(const Scene& model_scene, const std::string& frame_id,
                                           const FrameEstimate& rough_pose,
                                           const PointCloud& scan, const std::vector<int>& include,
                                           const MultiBrickConfig& cfg,
                                           const RigidTransform& render_sensor,
                                           std::vector<SolveReport>* reports) {
  if (!scan.has_normals()) throw BadArgument("scan needs normals for brick refinement");

  std::map<int, Body> bodies;
  for (const auto& b : model_scene.bricks) {
    if (b.frame != frame_id) continue;
    Body body;
    body.brick = b;
    body.T = planar_to_rigid(b.pose, b.z_base);
    body.center = Eigen::Vector3d(b.pose.x, b.pose.y, b.z_base + 0.5 * kBrickSide);
    bodies[b.id] = body;
  }
  if (bodies.empty()) throw BadArgument("no bricks in frame " + frame_id);

  std::set<int> wanted(include.begin(), include.end());
  if (wanted.empty())
    for (const auto& [id, body] : bodies) wanted.insert(id);
  for (int id : wanted) {
    auto it = bodies.find(id);
    if (it == bodies.end()) throw BadArgument("included brick not in the model");
    it->second.free = true;
  }

  // model cloud at the rough pose, ground in so occlusion is honest
  Scene hyp = model_scene;
  hyp.frames[frame_id] = rough_pose.pose;
  RenderConfig rc = cfg.render;
  rc.include_ground = true;
  PointCloud rendered = render_model_cloud(hyp, render_sensor, rc);

  // model points live in the parent frame; the scan stays where it is
  const RigidTransform& A = rough_pose.pose;
  RigidTransform inv = inverse(A);
  std::vector<Eigen::Vector3d> model_pts(rendered.size()), model_nrm(rendered.size());
  for (int i = 0; i < rendered.size(); ++i) {
    model_pts[i] = inv.R * rendered.points[i] + inv.t;
    model_nrm[i] = inv.R * rendered.normals[i];
    int lbl = rendered.labels[i];
    auto it = bodies.find(lbl);
    if (it != bodies.end()) it->second.model_idx.push_back(i);
  }

  // contact edges in the parent frame, fixed once at initialization
  Plane gp;
  gp.n = A.R.transpose() * model_scene.ground.n;
  gp.d = model_scene.ground.d - model_scene.ground.n.dot(A.t);
  std::vector<Brick> local;
  for (const auto& [id, body] : bodies) local.push_back(body.brick);
  ContactGraph graph = contact_graph(local, gp, cfg.contact_tol);

  KdTree tree(scan.points);
  std::map<int, Eigen::Vector4d> delta;
  for (const auto& [id, body] : bodies) delta[id] = Eigen::Vector4d::Zero();

  int rounds = std::max(1, cfg.rounds);
  int per_round = std::max(1, cfg.solver.max_iterations / rounds);

  for (int round = 0; round < rounds; ++round) {
    ResidualProblem prob;
    for (auto& [id, body] : bodies) {
      body.block = prob.add_block("b" + std::to_string(id), delta[id], !body.free);
      if (body.free && !cfg.free_z) prob.set_constant_coords(body.block, {3});
    }
    int ground_block = prob.add_block("ground", Eigen::Vector4d::Zero(), true);

    bool any_data = false;
    for (auto& [id, body] : bodies) {
      if (!body.free) continue;
      auto pairs = associate_brick(body, delta[id], A, model_pts, model_nrm, scan, tree,
                                   cfg.lambda_dist, cfg.lambda_dot);
      if (pairs.empty()) {
        prob.set_frozen(body.block, true);  // nothing seen this round
        continue;
      }
      any_data = true;
      double scale = 1.0 / std::sqrt(double(pairs.size()));
      residuals::BrickFrame f{A.R, A.t, body.center};
      for (const auto& [mi, si] : pairs) {
        prob.add_residual({body.block}, 1,
                          residuals::brick_point_to_plane(f, model_pts[mi], scan.points[si],
                                                          scan.normals[si], scale),
                          true);
      }
    }
    if (!any_data) break;

    auto frozen = [&](int id) {
      const Body& b = bodies.at(id);
      return !b.free || prob.frozen(b.block);
    };
    for (const auto& [ia, ib] : graph.edges) {
      if (frozen(ia) && frozen(ib)) continue;
      const Body& bi = bodies.at(ia);
      const Body& bj = bodies.at(ib);
      prob.add_residual({bi.block, bj.block}, 9,
                        residuals::pair_rotation(bi.T.R, bj.T.R, cfg.lambda_r), true);
      prob.add_residual({bi.block, bj.block}, 3,
                        residuals::pair_translation(bi.T, bj.T, bi.center, bj.center,
                                                    cfg.lambda_t),
                        true);
    }
    for (int id : graph.ground_bricks) {
      if (frozen(id)) continue;
      const Body& bi = bodies.at(id);
      prob.add_residual({bi.block, ground_block}, 9,
                        residuals::pair_rotation(bi.T.R, Eigen::Matrix3d::Identity(),
                                                 cfg.lambda_r),
                        true);
      prob.add_residual({bi.block, ground_block}, 3,
                        residuals::pair_translation(bi.T, RigidTransform{}, bi.center,
                                                    Eigen::Vector3d::Zero(), cfg.lambda_t),
                        true);
    }

    SolverConfig sc = cfg.solver;
    sc.max_iterations = per_round;
    SolveReport rep = solve(prob, sc);
    if (reports) reports->push_back(rep);
    for (auto& [id, body] : bodies)
      if (body.free) delta[id] = prob.value(body.block);
  }

  std::vector<BrickEstimate> out;
  for (int id : wanted) {
    const Body& body = bodies.at(id);
    BrickEstimate e;
    e.id = id;
    e.type = body.brick.type;
    e.expected = int(body.model_idx.size());
    const Eigen::Vector4d& d = delta.at(id);
    e.pose = PlanarPose(body.brick.pose.x + d(1), body.brick.pose.y + d(2),
                        body.brick.pose.yaw + d(0));
    e.z_base = body.brick.z_base + d(3);
    if (e.expected > 0) {
      auto pairs = associate_brick(body, d, A, model_pts, model_nrm, scan, tree,
                                   cfg.lambda_dist, cfg.lambda_dot);
      e.pairs = int(pairs.size());
      e.confidence = std::min(1.0, double(e.pairs) / double(e.expected));
    }
    out.push_back(e);
  }
  return out;
}

std::vector<int> pickable_bricks(const std::vector<BrickEstimate>& estimates,
                                 double min_confidence) {
  std::vector<const BrickEstimate*> keep;
  for (const auto& e : estimates)
    if (e.confidence >= min_confidence) keep.push_back(&e);
  std::sort(keep.begin(), keep.end(), [](const BrickEstimate* a, const BrickEstimate* b) {
    if (a->confidence != b->confidence) return a->confidence > b->confidence;
    return a->id < b->id;
  });
  std::vector<int> ids;
  for (const auto* e : keep) ids.push_back(e->id);
  return ids;
}

}  // namespace brickyard
