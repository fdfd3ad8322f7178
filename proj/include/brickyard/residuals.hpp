#pragma once
#include <Eigen/Dense>

#include "brickyard/core.hpp"
#include "brickyard/nls.hpp"
#include "brickyard/so3.hpp"

namespace brickyard {
namespace residuals {

// Pose block: 6 parameters (omega, t) around a base transform (R0, t0);
// the realized map is  p -> exp(omega) R0 p + t0 + t.

inline Eigen::Matrix3d rot_z_deriv(double yaw) {
  double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix3d D;
  D << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return D;
}

// n . (T(x) p - q), scalar
inline ResidualProblem::EvalFn point_to_plane(const Eigen::Matrix3d& R0,
                                              const Eigen::Vector3d& t0,
                                              const Eigen::Vector3d& p,
                                              const Eigen::Vector3d& q,
                                              const Eigen::Vector3d& n) {
  return [=](const std::vector<Eigen::VectorXd>& params, Eigen::VectorXd& r,
             std::vector<Eigen::MatrixXd>* jac) {
    Eigen::Vector3d w = params[0].head<3>();
    Eigen::Vector3d t = params[0].tail<3>();
    Eigen::Matrix3d E = so3_exp(w);
    Eigen::Vector3d v = R0 * p;
    r.resize(1);
    r(0) = n.dot(E * v + t0 + t - q);
    if (jac) {
      Eigen::Matrix3d dRv = -E * so3_hat(v) * so3_right_jacobian(w);
      (*jac)[0].resize(1, 6);
      (*jac)[0].block<1, 3>(0, 0) = n.transpose() * dRv;
      (*jac)[0].block<1, 3>(0, 3) = n.transpose();
    }
  };
}

// T(x) p - q, 3-vector
inline ResidualProblem::EvalFn point_to_point(const Eigen::Matrix3d& R0,
                                              const Eigen::Vector3d& t0,
                                              const Eigen::Vector3d& p,
                                              const Eigen::Vector3d& q) {
  return [=](const std::vector<Eigen::VectorXd>& params, Eigen::VectorXd& r,
             std::vector<Eigen::MatrixXd>* jac) {
    Eigen::Vector3d w = params[0].head<3>();
    Eigen::Vector3d t = params[0].tail<3>();
    Eigen::Matrix3d E = so3_exp(w);
    Eigen::Vector3d v = R0 * p;
    r = E * v + t0 + t - q;
    if (jac) {
      (*jac)[0].resize(3, 6);
      (*jac)[0].block<3, 3>(0, 0) = -E * so3_hat(v) * so3_right_jacobian(w);
      (*jac)[0].block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
    }
  };
}

// sqrt(weight) * (1 - l . xy(exp(omega) R0 axis)): pulls the rotated axis
// onto the ground-projected front-line direction l (unit 2-vector)
inline ResidualProblem::EvalFn direction_prior(const Eigen::Matrix3d& R0,
                                               const Eigen::Vector3d& axis,
                                               const Eigen::Vector2d& l, double weight) {
  return [=](const std::vector<Eigen::VectorXd>& params, Eigen::VectorXd& r,
             std::vector<Eigen::MatrixXd>* jac) {
    Eigen::Vector3d w = params[0].head<3>();
    Eigen::Matrix3d E = so3_exp(w);
    Eigen::Vector3d v = R0 * axis;
    Eigen::Vector3d x = E * v;
    double s = std::sqrt(weight);
    r.resize(1);
    r(0) = s * (1.0 - (l.x() * x.x() + l.y() * x.y()));
    if (jac) {
      Eigen::Matrix3d dRv = -E * so3_hat(v) * so3_right_jacobian(w);
      Eigen::Vector3d l3(l.x(), l.y(), 0.0);
      (*jac)[0].resize(1, 6);
      (*jac)[0].block<1, 3>(0, 0) = -s * l3.transpose() * dRv;
      (*jac)[0].block<1, 3>(0, 3).setZero();
    }
  };
}

// Brick delta block: 4 parameters (theta, tx, ty, tz). The delta acts in
// the parent frame, rotating about the vertical through the brick center c:
//   p_parent -> rot_z(theta) (p_parent - c) + c + t
// world_from_parent (A, b) is fixed during a solve.

struct BrickFrame {
  Eigen::Matrix3d A;   // world_from_parent rotation
  Eigen::Vector3d b;   // world_from_parent translation
  Eigen::Vector3d c;   // brick center in the parent frame
};

// scale * n . (world(delta(p)) - q), scalar; p in the parent frame
inline ResidualProblem::EvalFn brick_point_to_plane(const BrickFrame& f,
                                                    const Eigen::Vector3d& p,
                                                    const Eigen::Vector3d& q,
                                                    const Eigen::Vector3d& n, double scale) {
  return [=](const std::vector<Eigen::VectorXd>& params, Eigen::VectorXd& r,
             std::vector<Eigen::MatrixXd>* jac) {
    double th = params[0](0);
    Eigen::Vector3d t = params[0].tail<3>();
    Eigen::Matrix3d Rz = rot_z(th);
    Eigen::Vector3d pp = Rz * (p - f.c) + f.c + t;
    Eigen::Vector3d pw = f.A * pp + f.b;
    r.resize(1);
    r(0) = scale * n.dot(pw - q);
    if (jac) {
      (*jac)[0].resize(1, 4);
      (*jac)[0](0, 0) = scale * n.dot(f.A * (rot_z_deriv(th) * (p - f.c)));
      (*jac)[0].block<1, 3>(0, 1) = scale * n.transpose() * f.A;
    }
  };
}

// sqrt(lambda_r) * vec(Rz(ti) Ri Rj^T Rz(tj)^T Rj Ri^T - I), 9-vector over
// two delta blocks; Ri, Rj are the initial brick rotations in the parent
inline ResidualProblem::EvalFn pair_rotation(const Eigen::Matrix3d& Ri,
                                             const Eigen::Matrix3d& Rj, double lambda_r) {
  return [=](const std::vector<Eigen::VectorXd>& params, Eigen::VectorXd& r,
             std::vector<Eigen::MatrixXd>* jac) {
    double ti = params[0](0), tj = params[1](0);
    double s = std::sqrt(lambda_r);
    Eigen::Matrix3d L = Ri * Rj.transpose();       // fixed left part
    Eigen::Matrix3d Rgt = Rj * Ri.transpose();     // fixed right part
    Eigen::Matrix3d M = rot_z(ti) * L * rot_z(tj).transpose() * Rgt;
    r.resize(9);
    Eigen::Matrix3d D = M - Eigen::Matrix3d::Identity();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r(3 * a + b) = s * D(a, b);
    if (jac) {
      Eigen::Matrix3d dMi = rot_z_deriv(ti) * L * rot_z(tj).transpose() * Rgt;
      Eigen::Matrix3d dMj = rot_z(ti) * L * rot_z_deriv(tj).transpose() * Rgt;
      (*jac)[0].setZero(9, 4);
      (*jac)[1].setZero(9, 4);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          (*jac)[0](3 * a + b, 0) = s * dMi(a, b);
          (*jac)[1](3 * a + b, 0) = s * dMj(a, b);
        }
    }
  };
}

// sqrt(lambda_t) * translation(Di Ti (Dj Tj)^-1 Tj Ti^-1), 3-vector; Di is
// the delta transform of brick i, Ti the initial pose in the parent
inline ResidualProblem::EvalFn pair_translation(const RigidTransform& Ti,
                                                const RigidTransform& Tj,
                                                const Eigen::Vector3d& ci,
                                                const Eigen::Vector3d& cj, double lambda_t) {
  RigidTransform A = compose(Ti, inverse(Tj));  // Ti Tj^-1
  RigidTransform B = compose(Tj, inverse(Ti));  // Tj Ti^-1
  return [=](const std::vector<Eigen::VectorXd>& params, Eigen::VectorXd& r,
             std::vector<Eigen::MatrixXd>* jac) {
    double thi = params[0](0), thj = params[1](0);
    Eigen::Vector3d ti = params[0].tail<3>(), tj = params[1].tail<3>();
    double s = std::sqrt(lambda_t);
    Eigen::Matrix3d Rzi = rot_z(thi), Rzj = rot_z(thj);
    Eigen::Vector3d taui = ci + ti - Rzi * ci;
    Eigen::Vector3d tauj = cj + tj - Rzj * cj;
    Eigen::Vector3d tU = A.R * (Rzj.transpose() * (B.t - tauj)) + A.t;
    Eigen::Vector3d tM = Rzi * tU + taui;
    r = s * tM;
    if (jac) {
      Eigen::Matrix3d dRzi = rot_z_deriv(thi), dRzj = rot_z_deriv(thj);
      (*jac)[0].setZero(3, 4);
      (*jac)[0].col(0) = s * (dRzi * tU - dRzi * ci);
      (*jac)[0].block<3, 3>(0, 1) = s * Eigen::Matrix3d::Identity();
      Eigen::Vector3d dtU_th = A.R * (dRzj.transpose() * (B.t - tauj) +
                                      Rzj.transpose() * (dRzj * cj));
      Eigen::Matrix3d dtU_t = -A.R * Rzj.transpose();
      (*jac)[1].setZero(3, 4);
      (*jac)[1].col(0) = s * (Rzi * dtU_th);
      (*jac)[1].block<3, 3>(0, 1) = s * (Rzi * dtU_t);
    }
  };
}

}  // namespace residuals
}  // namespace brickyard
