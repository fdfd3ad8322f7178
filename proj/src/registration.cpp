#include "brickyard/registration.hpp"

#include <algorithm>
#include <limits>

#include "brickyard/parallel.hpp"
#include "brickyard/residuals.hpp"
#include "brickyard/rng.hpp"

namespace brickyard {

void to_json(json& j, const FrameEstimate& e) {
  j = json{{"pose", e.pose}, {"cost", e.cost}, {"pairs", e.pairs}, {"converged", e.converged}};
}
void from_json(const json& j, FrameEstimate& e) {
  e.pose = j.at("pose").get<RigidTransform>();
  e.cost = j.at("cost").get<double>();
  e.pairs = j.at("pairs").get<int>();
  e.converged = j.at("converged").get<bool>();
}

PointCloud preprocess_scan(const PointCloud& scan, const Eigen::Vector3d& crop_center,
                           const RegistrationConfig& cfg, const Eigen::Vector3d& viewpoint,
                           uint64_t seed, bool remove_ground) {
  if (scan.points.empty()) throw EmptyCloud("preprocess_scan");
  double half = cfg.crop_half_extent;
  if (half <= 0) half = 3.0;  // callers with a model pass a computed extent
  PointCloud cropped;
  cropped.frame = scan.frame;
  for (size_t i = 0; i < scan.points.size(); ++i) {
    Eigen::Vector3d d = scan.points[i] - crop_center;
    if (std::abs(d.x()) <= half && std::abs(d.y()) <= half && std::abs(d.z()) <= half)
      cropped.points.push_back(scan.points[i]);
  }
  if (cropped.points.empty()) throw EmptyAfterCrop("crop around target removed every point");
  PointCloud down = voxel_downsample(cropped, cfg.voxel);
  if (remove_ground) {
    try {
      auto plane = ransac_plane(down, cfg.ransac_inlier, cfg.ransac_iters, seed);
      std::vector<uint8_t> drop(down.points.size(), 0);
      for (int i : plane.inliers) drop[i] = 1;
      PointCloud kept;
      kept.frame = down.frame;
      for (size_t i = 0; i < down.points.size(); ++i)
        if (!drop[i]) kept.points.push_back(down.points[i]);
      down = std::move(kept);
    } catch (const NoPlaneFound&) {
      // scan without a dominant plane: nothing to remove
    }
  }
  if (down.points.size() < size_t(cfg.normal_k) + 1)
    throw EmptyAfterCrop("too few points after preprocessing");
  return estimate_normals(down, cfg.normal_k, viewpoint);
}

namespace {

struct Pairing {
  std::vector<std::pair<int, int>> pairs;  // model idx, scan idx
};

// nearest model point per scan point; queries run against the static model
// tree with the scan pulled back through the current delta
Pairing associate(const KdTree& model_tree, const PointCloud& scan, const RigidTransform& T,
                  double max_dist) {
  size_t n = scan.points.size();
  std::vector<int> match(n, -1);
  parallel_for(int64_t(n), [&](int64_t j) {
    Eigen::Vector3d qm = T.R.transpose() * (scan.points[j] - T.t);
    match[j] = model_tree.nearest(qm, max_dist);
  });
  Pairing out;
  for (size_t j = 0; j < n; ++j)
    if (match[j] >= 0) out.pairs.emplace_back(match[j], int(j));
  return out;
}

// alignment quality of a candidate delta: mean capped nearest-neighbor
// distance over (strided) scan points; lower is better
constexpr double kScoreCap = 0.25;
constexpr size_t kScorePoints = 2000;

double alignment_score(const KdTree& model_tree, const PointCloud& scan,
                       const RigidTransform& T) {
  size_t stride = std::max<size_t>(1, scan.points.size() / kScorePoints);
  double sum = 0.0;
  int used = 0;
  for (size_t j = 0; j < scan.points.size(); j += stride) {
    Eigen::Vector3d qm = T.R.transpose() * (scan.points[j] - T.t);
    double d = kScoreCap;
    model_tree.nearest(qm, kScoreCap, &d);
    sum += d;
    used++;
  }
  return sum / double(used);
}

// grid search for the in-basin start: yaw about the model centroid crossed
// with a translation grid around the scan/model centroid offset, scored by
// alignment_score; skipped when the centroids are farther apart than the
// association envelope (so far-off scans still fail with NoCorrespondences)
constexpr double kSearchYaw = 20.0 * M_PI / 180.0;
constexpr double kSearchYawStep = 2.5 * M_PI / 180.0;
constexpr double kSearchShift = 0.20;
constexpr double kSearchShiftStep = 0.05;

RigidTransform coarse_search(const PointCloud& model, const KdTree& model_tree,
                             const PointCloud& scan, const RigidTransform& T0,
                             const RegistrationConfig& cfg) {
  Eigen::Vector3d cm = Eigen::Vector3d::Zero(), cs = Eigen::Vector3d::Zero();
  for (const auto& p : model.points) cm += T0.apply(p);
  cm /= double(model.points.size());
  for (const auto& q : scan.points) cs += q;
  cs /= double(scan.points.size());
  Eigen::Vector3d dc = cs - cm;
  dc.z() = 0.0;
  if (dc.head<2>().norm() > cfg.initial_corr_dist) return T0;

  double best = std::numeric_limits<double>::max();
  RigidTransform best_T = T0;
  int ny = int(std::round(kSearchYaw / kSearchYawStep));
  int ns = int(std::round(kSearchShift / kSearchShiftStep));
  for (int yi = -ny; yi <= ny; ++yi) {
    Eigen::Matrix3d R =
        Eigen::AngleAxisd(yi * kSearchYawStep, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    for (int xi = -ns; xi <= ns; ++xi) {
      for (int yj = -ns; yj <= ns; ++yj) {
        Eigen::Vector3d off(xi * kSearchShiftStep, yj * kSearchShiftStep, 0.0);
        RigidTransform delta;
        delta.R = R;
        delta.t = cm + dc + off - R * cm;
        RigidTransform cand = compose(delta, T0);
        double score = alignment_score(model_tree, scan, cand);
        if (score < best - 1e-12) {
          best = score;
          best_T = cand;
        }
      }
    }
  }
  return best_T;
}

struct StageResult {
  double cost = 0.0;
  int pairs = 0;
  Termination termination = Termination::max_iter;
};

// one association/solve alternation stage; T is updated in place. Each round
// takes a single damped solver step on the current pairs (the delta is kept
// planar: yaw plus ground translation), and the step only sticks if the
// re-associated alignment score does not get worse; a rejected full step is
// retried at half length before the round counts as a failure.
StageResult run_stage(const PointCloud& model, const KdTree& model_tree, const PointCloud& scan,
                      RigidTransform& T, const RegistrationConfig& cfg, bool point_to_plane,
                      double start_dist, double end_dist,
                      const std::optional<Eigen::Vector2d>& marker_direction,
                      const Eigen::Vector3d& model_x, std::vector<SolveReport>* reports) {
  StageResult result;
  SolverConfig step_cfg = cfg.solver;
  step_cfg.max_iterations = 1;
  double dist = std::max(start_dist, end_dist);
  for (int round = 0; round < cfg.max_rounds; ++round) {
    Pairing pairing = associate(model_tree, scan, T, dist);
    if (int(pairing.pairs.size()) < cfg.min_pairs)
      throw NoCorrespondences("association found " + std::to_string(pairing.pairs.size()) +
                              " pairs");
    ResidualProblem problem;
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
    int pose = problem.add_block("pose", x0);
    problem.set_constant_coords(pose, {0, 1, 5});
    for (const auto& [mi, si] : pairing.pairs) {
      if (point_to_plane)
        problem.add_residual({pose}, 1,
                             residuals::point_to_plane(T.R, T.t, model.points[mi],
                                                       scan.points[si], scan.normals[si]),
                             true);
      else
        problem.add_residual({pose}, 3,
                             residuals::point_to_point(T.R, T.t, model.points[mi],
                                                       scan.points[si]),
                             true);
    }
    if (marker_direction)
      problem.add_residual({pose}, 1,
                           residuals::direction_prior(T.R, model_x,
                                                      marker_direction->normalized(),
                                                      cfg.dir_weight),
                           true);
    SolveReport rep = solve(problem, step_cfg);
    Eigen::VectorXd x = problem.value(pose);
    Eigen::Vector3d w = x.head<3>(), t = x.tail<3>();
    RigidTransform cand;
    cand.R = so3_exp(w) * T.R;
    cand.t = T.t + t;
    double before = alignment_score(model_tree, scan, T);
    double after = alignment_score(model_tree, scan, cand);
    bool accepted = after <= before + 1e-12;
    if (!accepted) {
      RigidTransform half;
      half.R = so3_exp(0.5 * w) * T.R;
      half.t = T.t + 0.5 * t;
      double half_score = alignment_score(model_tree, scan, half);
      if (half_score <= before + 1e-12) {
        cand = half;
        accepted = true;
      }
    }
    result.pairs = int(pairing.pairs.size());
    result.termination = rep.termination;
    if (accepted) {
      T = cand;
      result.cost = rep.final_cost;
      if (reports) reports->push_back(rep);
    } else {
      result.cost = rep.initial_cost;
    }
    double update = std::max(w.lpNorm<Eigen::Infinity>(), t.lpNorm<Eigen::Infinity>());
    bool at_end = dist <= end_dist + 1e-12;
    if (at_end && (!accepted || update < 1e-7)) break;
    dist = std::max(end_dist, 0.5 * dist);
  }
  return result;
}

}  // namespace

FrameEstimate rough_align(const PointCloud& model, const PointCloud& scan,
                          const RigidTransform& init, const RegistrationConfig& cfg,
                          const std::optional<Eigen::Vector2d>& marker_direction,
                          const Eigen::Vector3d& model_x, std::vector<SolveReport>* reports) {
  if (model.points.empty() || scan.points.empty()) throw EmptyCloud("rough_align");
  if (!scan.has_normals()) throw BadArgument("rough_align needs scan normals");
  KdTree model_tree(model.points);
  RigidTransform T = coarse_search(model, model_tree, scan, init, cfg);
  run_stage(model, model_tree, scan, T, cfg, true, cfg.initial_corr_dist, cfg.rough_corr_dist,
            marker_direction, model_x, reports);
  StageResult fine = run_stage(model, model_tree, scan, T, cfg, false, cfg.fine_corr_dist,
                               cfg.fine_corr_dist, marker_direction, model_x, reports);
  FrameEstimate out;
  out.pose = T;
  out.cost = fine.cost;
  out.pairs = fine.pairs;
  double rms = fine.pairs > 0 ? std::sqrt(fine.cost / double(fine.pairs)) : 1e9;
  bool solver_ok = fine.termination == Termination::param_tol ||
                   fine.termination == Termination::cost_tol ||
                   fine.termination == Termination::max_iter;
  out.converged = solver_ok && rms <= cfg.converged_rms;
  return out;
}

FrameEstimate register_target(const Scene& model_scene, const std::string& model_frame,
                              const PointCloud& scan, const RigidTransform& init,
                              const RegistrationConfig& cfg,
                              const RigidTransform& render_sensor, uint64_t seed,
                              const std::optional<Eigen::Vector2d>& marker_direction,
                              std::vector<SolveReport>* reports) {
  Scene hyp = model_scene;
  hyp.frames[model_frame] = init;
  RenderConfig rc;
  rc.voxel = cfg.voxel;
  rc.include_ground = false;
  PointCloud model = render_model_cloud(hyp, render_sensor, rc);

  // crop box sized from the hypothesis geometry
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
  {
    SceneGeometry geom(hyp, false, false);
    if (geom.boxes().empty()) throw EmptyView("model has no bricks");
    for (const auto& [box, label] : geom.boxes()) center += box.pose.t;
    center /= double(geom.boxes().size());
    for (const auto& [box, label] : geom.boxes())
      radius = std::max(radius, (box.pose.t - center).norm() + box.half.norm());
  }
  RegistrationConfig local = cfg;
  if (local.crop_half_extent <= 0) local.crop_half_extent = radius + 1.0;
  PointCloud scan_p =
      preprocess_scan(scan, center, local, render_sensor.t, mix_seed(seed, 1), true);

  FrameEstimate delta = rough_align(model, scan_p, RigidTransform::identity(), local,
                                    marker_direction, init.R * Eigen::Vector3d::UnitX(), reports);
  FrameEstimate out = delta;
  out.pose = compose(delta.pose, init);
  return out;
}

}  // namespace brickyard
