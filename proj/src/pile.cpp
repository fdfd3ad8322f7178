#include "brickyard/pile.hpp"

#include <algorithm>

#include "brickyard/errors.hpp"

namespace brickyard {

void to_json(json& j, const PileHypothesis& p) {
  Eigen::Quaterniond q(p.frame.R);
  if (q.w() < 0) q.coeffs() *= -1.0;
  j = json{{"origin", {p.frame.t.x(), p.frame.t.y(), p.frame.t.z()}},
           {"quaternion", {q.w(), q.x(), q.y(), q.z()}},
           {"extent", {p.extent.x(), p.extent.y(), p.extent.z()}},
           {"score", p.score},
           {"ground_normal", {p.ground.n.x(), p.ground.n.y(), p.ground.n.z()}},
           {"ground_offset", p.ground.d}};
}

void from_json(const json& j, PileHypothesis& p) {
  auto o = j.at("origin");
  p.frame.t = Eigen::Vector3d(o[0], o[1], o[2]);
  auto q = j.at("quaternion");
  p.frame.R = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  auto e = j.at("extent");
  p.extent = Eigen::Vector3d(e[0], e[1], e[2]);
  p.score = j.at("score");
  auto n = j.at("ground_normal");
  p.ground.n = Eigen::Vector3d(n[0], n[1], n[2]);
  p.ground.d = j.at("ground_offset");
}

PileHypothesis detect_pile(const PointCloud& scan, const Geofence& fence,
                           const Eigen::Vector3d& expected_extent, const PileDetectConfig& cfg,
                           uint64_t seed) {
  std::vector<int> inside;
  for (int i = 0; i < scan.size(); ++i) {
    const auto& p = scan.points[i];
    if (p.x() >= fence.x_min && p.x() <= fence.x_max && p.y() >= fence.y_min &&
        p.y() <= fence.y_max)
      inside.push_back(i);
  }
  if (inside.empty()) throw NoPile("no points inside the geofence");
  PointCloud fenced = select(scan, inside);
  if (cfg.voxel > 0) fenced = voxel_downsample(fenced, cfg.voxel);

  Plane ground;
  try {
    ground = ransac_plane(fenced, cfg.ransac_inlier, cfg.ransac_iters, seed).plane;
  } catch (const NoPlaneFound&) {
    throw NoGround("ground plane fit failed inside the geofence");
  }

  std::vector<int> above;
  for (int i = 0; i < fenced.size(); ++i)
    if (signed_distance(ground, fenced.points[i]) >= cfg.ground_clear) above.push_back(i);
  if (above.empty()) throw NoPile("nothing sticks out of the ground plane");
  PointCloud elevated = select(fenced, above);

  auto clusters = euclidean_cluster(elevated, cfg.link_dist, cfg.min_cluster);
  if (clusters.empty()) throw NoPile("no cluster above the minimum size");

  // clusters arrive sorted by size; take the first one whose oriented extent
  // is close to what we were told to expect
  for (const auto& members : clusters) {
    PointCloud c = select(elevated, members);
    RigidTransform frame = pca_frame(elevated, members, ground.n);
    Eigen::Vector3d lo(1e300, 1e300, 1e300), hi(-1e300, -1e300, -1e300);
    for (const auto& p : c.points) {
      Eigen::Vector3d q = frame.R.transpose() * (p - frame.t);
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    Eigen::Vector3d extent = hi - lo;
    bool ok = true;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(extent[a] - expected_extent[a]) > cfg.extent_tol * expected_extent[a]) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    PileHypothesis out;
    out.frame.R = frame.R;
    out.frame.t = frame.t + frame.R * ((lo + hi) * 0.5);  // box center, not centroid
    out.extent = extent;
    out.score = int(members.size());
    out.ground = ground;
    return out;
  }
  throw NoPile("no cluster matches the expected extent");
}

}  // namespace brickyard
