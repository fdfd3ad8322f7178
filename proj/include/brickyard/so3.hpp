#pragma once
#include <Eigen/Dense>
#include <cmath>

namespace brickyard {

inline Eigen::Matrix3d so3_hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  double th2 = w.squaredNorm();
  Eigen::Matrix3d W = so3_hat(w);
  if (th2 < 1e-16) return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  double th = std::sqrt(th2);
  return Eigen::Matrix3d::Identity() + (std::sin(th) / th) * W +
         ((1.0 - std::cos(th)) / th2) * W * W;
}

// d/d(dw) exp(w + dw) = exp(w) * hat(Jr(w) dw) to first order
inline Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w) {
  double th2 = w.squaredNorm();
  Eigen::Matrix3d W = so3_hat(w);
  if (th2 < 1e-16) return Eigen::Matrix3d::Identity() - 0.5 * W + (1.0 / 6.0) * W * W;
  double th = std::sqrt(th2);
  return Eigen::Matrix3d::Identity() - ((1.0 - std::cos(th)) / th2) * W +
         ((th - std::sin(th)) / (th2 * th)) * W * W;
}

inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  double th = std::acos(c);
  Eigen::Vector3d axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (th < 1e-9) return 0.5 * axis;
  return (th / (2.0 * std::sin(th))) * axis;
}

}  // namespace brickyard
