#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "brickyard/core.hpp"

namespace brickyard {

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // empty, or one per point (unit norm)
  std::vector<int> labels;               // empty, or one per point
  std::string frame = "world";

  size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_labels() const { return !labels.empty(); }
};

struct Plane {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();  // unit
  double d = 0.0;                                // n . x = d
};

inline double signed_distance(const Plane& pl, const Eigen::Vector3d& p) {
  return pl.n.dot(p) - pl.d;
}

// static KD-tree over a point set; all queries tie-break on index so
// results are independent of build details
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const std::vector<Eigen::Vector3d>& pts);

  // k nearest, sorted by (distance, index)
  std::vector<int> knn(const Eigen::Vector3d& q, int k) const;
  // all points within r, sorted by index
  std::vector<int> radius(const Eigen::Vector3d& q, double r) const;
  // index of the nearest point within max_dist, or -1
  int nearest(const Eigen::Vector3d& q, double max_dist, double* dist = nullptr) const;

  size_t size() const { return pts_.size(); }

 private:
  struct Node {
    int axis = -1;        // -1 for leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };
  int build(int begin, int end, int depth);
  std::vector<Eigen::Vector3d> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

PointCloud select(const PointCloud& pc, const std::vector<int>& indices);
PointCloud concat(const PointCloud& a, const PointCloud& b);

// centroid per occupied voxel; majority label, averaged normals
PointCloud voxel_downsample(const PointCloud& pc, double voxel);

// PCA normal per point from its k nearest neighbors, flipped toward the
// viewpoint; points with a degenerate (rank < 2) neighborhood are dropped
PointCloud estimate_normals(const PointCloud& pc, int k, const Eigen::Vector3d& viewpoint);

struct RansacPlaneResult {
  Plane plane;
  std::vector<int> inliers;  // ascending
};

// seeded plane fit; least-squares refit over the winning inlier set.
// throws NoPlaneFound if the best inlier ratio is below 10%.
RansacPlaneResult ransac_plane(const PointCloud& pc, double inlier_dist, int iterations,
                               uint64_t seed);

// connected components under the link distance, clusters >= min_size,
// sorted by size descending; members ascending
std::vector<std::vector<int>> euclidean_cluster(const PointCloud& pc, double link_dist,
                                                int min_size);

// frame at the centroid: X = principal axis projected into the plane
// normal to up (sign: world X >= 0, ties world Y >= 0), Z = up, Y = Z x X
RigidTransform pca_frame(const PointCloud& pc, const std::vector<int>& indices,
                         const Eigen::Vector3d& up);

// ascii PLY with optional normals and labels; the comment row carries the frame
void save_ply(const std::string& path, const PointCloud& pc);
PointCloud load_ply(const std::string& path);

}  // namespace brickyard
