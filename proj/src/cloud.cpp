#include "brickyard/cloud.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include "brickyard/parallel.hpp"
#include "brickyard/rng.hpp"

namespace brickyard {

// ---------------------------------------------------------------- kdtree

KdTree::KdTree(const std::vector<Eigen::Vector3d>& pts) : pts_(pts) {
  order_.resize(pts_.size());
  for (size_t i = 0; i < pts_.size(); ++i) order_[i] = int(i);
  if (!pts_.empty()) root_ = build(0, int(pts_.size()), 0);
}

int KdTree::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  int id = int(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 8 || depth > 48) return id;

  Eigen::Vector3d lo = pts_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(pts_[order_[i]]);
    hi = hi.cwiseMax(pts_[order_[i]]);
  }
  Eigen::Vector3d ext = hi - lo;
  int axis = 0;
  if (ext.y() > ext.x()) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;
  if (ext[axis] <= 0.0) return id;  // all coincident

  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     double pa = pts_[a][axis], pb = pts_[b][axis];
                     if (pa != pb) return pa < pb;
                     return a < b;
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = pts_[order_[mid]][axis];
  int left = build(begin, mid, depth + 1);
  int right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {
struct Cand {
  double d2;
  int idx;
  bool operator<(const Cand& o) const {  // max-heap: worst on top
    if (d2 != o.d2) return d2 < o.d2;
    return idx < o.idx;
  }
};
}  // namespace

std::vector<int> KdTree::knn(const Eigen::Vector3d& q, int k) const {
  std::vector<int> out;
  if (root_ < 0 || k <= 0) return out;
  std::priority_queue<Cand> heap;
  auto consider = [&](int idx) {
    double d2 = (pts_[idx] - q).squaredNorm();
    Cand c{d2, idx};
    if (int(heap.size()) < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  };
  // iterative DFS, nearer child first
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) consider(order_[i]);
      continue;
    }
    double delta = q[n.axis] - n.split;
    int first = delta <= 0 ? n.left : n.right;
    int second = delta <= 0 ? n.right : n.left;
    if (int(heap.size()) < k || delta * delta <= heap.top().d2) stack.push_back(second);
    stack.push_back(first);
  }
  std::vector<Cand> cands;
  while (!heap.empty()) {
    cands.push_back(heap.top());
    heap.pop();
  }
  std::sort(cands.begin(), cands.end());
  for (const Cand& c : cands) out.push_back(c.idx);
  return out;
}

std::vector<int> KdTree::radius(const Eigen::Vector3d& q, double r) const {
  std::vector<int> out;
  if (root_ < 0) return out;
  double r2 = r * r;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        int idx = order_[i];
        if ((pts_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
      }
      continue;
    }
    double delta = q[n.axis] - n.split;
    if (delta <= 0) {
      stack.push_back(n.left);
      if (delta * delta <= r2) stack.push_back(n.right);
    } else {
      stack.push_back(n.right);
      if (delta * delta <= r2) stack.push_back(n.left);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int KdTree::nearest(const Eigen::Vector3d& q, double max_dist, double* dist) const {
  if (root_ < 0) return -1;
  double best_d2 = max_dist * max_dist;
  int best = -1;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        int idx = order_[i];
        double d2 = (pts_[idx] - q).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = idx;
        } else if (d2 == best_d2 && (best < 0 || idx < best)) {
          best = idx;
        }
      }
      continue;
    }
    double delta = q[n.axis] - n.split;
    int first = delta <= 0 ? n.left : n.right;
    int second = delta <= 0 ? n.right : n.left;
    if (delta * delta <= best_d2) stack.push_back(second);
    stack.push_back(first);
  }
  if (dist && best >= 0) *dist = std::sqrt(best_d2);
  return best;
}

// ---------------------------------------------------------------- basic ops

PointCloud select(const PointCloud& pc, const std::vector<int>& indices) {
  PointCloud out;
  out.frame = pc.frame;
  out.points.reserve(indices.size());
  for (int i : indices) {
    out.points.push_back(pc.points[i]);
    if (pc.has_normals()) out.normals.push_back(pc.normals[i]);
    if (pc.has_labels()) out.labels.push_back(pc.labels[i]);
  }
  return out;
}

PointCloud concat(const PointCloud& a, const PointCloud& b) {
  PointCloud out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  if (a.has_normals() && b.has_normals())
    out.normals.insert(out.normals.end(), b.normals.begin(), b.normals.end());
  else
    out.normals.clear();
  if (a.has_labels() && b.has_labels())
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  else
    out.labels.clear();
  return out;
}

PointCloud voxel_downsample(const PointCloud& pc, double voxel) {
  if (pc.points.empty()) throw EmptyCloud("voxel_downsample");
  if (voxel <= 0) throw BadArgument("voxel size must be positive");
  using Key = std::array<int64_t, 3>;
  std::map<Key, std::vector<int>> cells;
  for (size_t i = 0; i < pc.points.size(); ++i) {
    const auto& p = pc.points[i];
    Key k{int64_t(std::floor(p.x() / voxel)), int64_t(std::floor(p.y() / voxel)),
          int64_t(std::floor(p.z() / voxel))};
    cells[k].push_back(int(i));
  }
  PointCloud out;
  out.frame = pc.frame;
  for (const auto& [key, members] : cells) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (int i : members) sum += pc.points[i];
    out.points.push_back(sum / double(members.size()));
    if (pc.has_normals()) {
      Eigen::Vector3d ns = Eigen::Vector3d::Zero();
      for (int i : members) ns += pc.normals[i];
      if (ns.norm() > 1e-12)
        out.normals.push_back(ns.normalized());
      else
        out.normals.push_back(pc.normals[members.front()]);
    }
    if (pc.has_labels()) {
      std::map<int, int> votes;
      for (int i : members) votes[pc.labels[i]]++;
      int best = members.front(), best_n = -1;
      for (const auto& [label, n] : votes)
        if (n > best_n) {
          best_n = n;
          best = label;
        }
      out.labels.push_back(best);
    }
  }
  return out;
}

PointCloud estimate_normals(const PointCloud& pc, int k, const Eigen::Vector3d& viewpoint) {
  if (pc.points.size() < size_t(k) + 1)
    throw EmptyCloud("estimate_normals needs at least k+1 points");
  KdTree tree(pc.points);
  size_t n = pc.points.size();
  std::vector<Eigen::Vector3d> normals(n);
  std::vector<uint8_t> ok(n, 0);
  parallel_for(int64_t(n), [&](int64_t i) {
    auto nb = tree.knn(pc.points[i], k + 1);  // includes the point itself
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j : nb) mean += pc.points[j];
    mean /= double(nb.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nb) {
      Eigen::Vector3d d = pc.points[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    if (ev(2) <= 0.0 || ev(1) <= 1e-9 * ev(2)) return;  // rank < 2
    Eigen::Vector3d nrm = eig.eigenvectors().col(0).normalized();
    double dot = nrm.dot(viewpoint - pc.points[i]);
    if (dot < 0) {
      nrm = -nrm;
    } else if (dot == 0.0) {
      int axis = 0;
      nrm.cwiseAbs().maxCoeff(&axis);
      if (nrm[axis] < 0) nrm = -nrm;
    }
    normals[i] = nrm;
    ok[i] = 1;
  });
  PointCloud out;
  out.frame = pc.frame;
  for (size_t i = 0; i < n; ++i) {
    if (!ok[i]) continue;
    out.points.push_back(pc.points[i]);
    out.normals.push_back(normals[i]);
    if (pc.has_labels()) out.labels.push_back(pc.labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------- ransac

namespace {
Plane canonicalize(Plane pl) {
  bool flip = false;
  if (pl.n.z() < 0)
    flip = true;
  else if (pl.n.z() == 0.0 && pl.n.y() < 0)
    flip = true;
  else if (pl.n.z() == 0.0 && pl.n.y() == 0.0 && pl.n.x() < 0)
    flip = true;
  if (flip) {
    pl.n = -pl.n;
    pl.d = -pl.d;
  }
  return pl;
}

std::vector<int> plane_inliers(const PointCloud& pc, const Plane& pl, double tol) {
  std::vector<int> out;
  for (size_t i = 0; i < pc.points.size(); ++i)
    if (std::abs(signed_distance(pl, pc.points[i])) <= tol) out.push_back(int(i));
  return out;
}
}  // namespace

RansacPlaneResult ransac_plane(const PointCloud& pc, double inlier_dist, int iterations,
                               uint64_t seed) {
  size_t n = pc.points.size();
  if (n < 3) throw EmptyCloud("ransac_plane needs at least 3 points");
  Rng rng(seed);
  Plane best;
  size_t best_count = 0;
  bool found = false;
  for (int it = 0; it < iterations; ++it) {
    int a = int(rng.uniform_index(n));
    int b = int(rng.uniform_index(n));
    int c = int(rng.uniform_index(n));
    if (a == b || a == c || b == c) continue;
    Eigen::Vector3d u = pc.points[b] - pc.points[a];
    Eigen::Vector3d v = pc.points[c] - pc.points[a];
    Eigen::Vector3d nrm = u.cross(v);
    double len = nrm.norm();
    if (len < 1e-12) continue;
    Plane pl{nrm / len, 0.0};
    pl.d = pl.n.dot(pc.points[a]);
    size_t count = 0;
    for (size_t i = 0; i < n; ++i)
      if (std::abs(signed_distance(pl, pc.points[i])) <= inlier_dist) ++count;
    if (count > best_count) {
      best_count = count;
      best = pl;
      found = true;
    }
  }
  if (!found || double(best_count) < 0.10 * double(n))
    throw NoPlaneFound("best inlier ratio below 10%");

  // least-squares refit on the winning set
  auto inl = plane_inliers(pc, best, inlier_dist);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int i : inl) mean += pc.points[i];
  mean /= double(inl.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : inl) {
    Eigen::Vector3d d = pc.points[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Plane refit{eig.eigenvectors().col(0).normalized(), 0.0};
  refit.d = refit.n.dot(mean);
  refit = canonicalize(refit);
  auto final_inl = plane_inliers(pc, refit, inlier_dist);
  if (double(final_inl.size()) < 0.10 * double(n))
    throw NoPlaneFound("refit inlier ratio below 10%");
  return {refit, final_inl};
}

// ---------------------------------------------------------------- clustering

std::vector<std::vector<int>> euclidean_cluster(const PointCloud& pc, double link_dist,
                                                int min_size) {
  if (pc.points.empty()) throw EmptyCloud("euclidean_cluster");
  KdTree tree(pc.points);
  size_t n = pc.points.size();
  std::vector<uint8_t> visited(n, 0);
  std::vector<std::vector<int>> clusters;
  for (size_t s = 0; s < n; ++s) {
    if (visited[s]) continue;
    std::vector<int> cluster, frontier{int(s)};
    visited[s] = 1;
    while (!frontier.empty()) {
      int cur = frontier.back();
      frontier.pop_back();
      cluster.push_back(cur);
      for (int nb : tree.radius(pc.points[cur], link_dist)) {
        if (!visited[nb]) {
          visited[nb] = 1;
          frontier.push_back(nb);
        }
      }
    }
    if (int(cluster.size()) >= min_size) {
      std::sort(cluster.begin(), cluster.end());
      clusters.push_back(std::move(cluster));
    }
  }
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return clusters;
}

RigidTransform pca_frame(const PointCloud& pc, const std::vector<int>& indices,
                         const Eigen::Vector3d& up) {
  if (indices.empty()) throw DegenerateCluster("empty index set");
  Eigen::Vector3d z = up.normalized();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int i : indices) mean += pc.points[i];
  mean /= double(indices.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : indices) {
    Eigen::Vector3d d = pc.points[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Vector3d principal = eig.eigenvectors().col(2);
  Eigen::Vector3d xp = principal - principal.dot(z) * z;
  if (xp.norm() < 1e-9) throw DegenerateCluster("principal axis parallel to up");
  Eigen::Vector3d x = xp.normalized();
  const double eps = 1e-12;
  if (x.x() < -eps)
    x = -x;
  else if (std::abs(x.x()) <= eps && x.y() < 0)
    x = -x;
  Eigen::Vector3d y = z.cross(x);
  RigidTransform out;
  out.R.col(0) = x;
  out.R.col(1) = y;
  out.R.col(2) = z;
  out.t = mean;
  return out;
}

// ---------------------------------------------------------------- ply io

void save_ply(const std::string& path, const PointCloud& pc) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw BadFile("cannot open " + path + " for writing");
  std::fprintf(f, "ply\nformat ascii 1.0\ncomment frame %s\n", pc.frame.c_str());
  std::fprintf(f, "element vertex %zu\n", pc.points.size());
  std::fprintf(f, "property double x\nproperty double y\nproperty double z\n");
  if (pc.has_normals())
    std::fprintf(f, "property double nx\nproperty double ny\nproperty double nz\n");
  if (pc.has_labels()) std::fprintf(f, "property int label\n");
  std::fprintf(f, "end_header\n");
  for (size_t i = 0; i < pc.points.size(); ++i) {
    const auto& p = pc.points[i];
    std::fprintf(f, "%.17g %.17g %.17g", p.x(), p.y(), p.z());
    if (pc.has_normals()) {
      const auto& nrm = pc.normals[i];
      std::fprintf(f, " %.17g %.17g %.17g", nrm.x(), nrm.y(), nrm.z());
    }
    if (pc.has_labels()) std::fprintf(f, " %d", pc.labels[i]);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

PointCloud load_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadFile("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw BadFile("not a ply file: " + path);
  size_t count = 0;
  std::vector<std::string> props;
  PointCloud pc;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw BadFile("only ascii ply supported");
    } else if (tok == "comment") {
      std::string what;
      ss >> what;
      if (what == "frame") ss >> pc.frame;
    } else if (tok == "element") {
      std::string what;
      ss >> what >> count;
      if (what != "vertex") throw BadFile("unexpected element " + what);
    } else if (tok == "property") {
      std::string type, name;
      ss >> type >> name;
      props.push_back(name);
    } else if (tok == "end_header") {
      break;
    }
  }
  bool has_n = std::find(props.begin(), props.end(), "nx") != props.end();
  bool has_l = std::find(props.begin(), props.end(), "label") != props.end();
  std::vector<std::string> expect{"x", "y", "z"};
  if (has_n) {
    expect.push_back("nx");
    expect.push_back("ny");
    expect.push_back("nz");
  }
  if (has_l) expect.push_back("label");
  if (props != expect) throw BadFile("unsupported property layout");
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw BadFile("truncated ply");
    std::istringstream ss(line);
    Eigen::Vector3d p;
    if (!(ss >> p.x() >> p.y() >> p.z())) throw BadFile("bad vertex row");
    pc.points.push_back(p);
    if (has_n) {
      Eigen::Vector3d nrm;
      if (!(ss >> nrm.x() >> nrm.y() >> nrm.z())) throw BadFile("bad normal row");
      pc.normals.push_back(nrm);
    }
    if (has_l) {
      int label;
      if (!(ss >> label)) throw BadFile("bad label row");
      pc.labels.push_back(label);
    }
  }
  return pc;
}

}  // namespace brickyard
