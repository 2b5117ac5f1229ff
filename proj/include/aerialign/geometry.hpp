#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "aerialign/errors.hpp"

namespace aer {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// se(3) tangent vector, rotation-first: [wx wy wz | vx vy vz].
///
/// The rotation-first ordering is load-bearing: factor residuals subtract
/// these vectors componentwise, and covariances are blocked the same way.
struct Twist6 {
  Vec3 rot = Vec3::Zero();    // radians
  Vec3 trans = Vec3::Zero();  // meters

  Twist6() = default;
  Twist6(const Vec3& r, const Vec3& t) : rot(r), trans(t) {}
  explicit Twist6(const Vec6& v) : rot(v.head<3>()), trans(v.tail<3>()) {}

  Vec6 vec() const {
    Vec6 v;
    v << rot, trans;
    return v;
  }
};

/// Rigid transform in SE(3); unit quaternion + translation.
/// Values are immutable in spirit: all operations return new poses.
struct Pose3 {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Pose3() = default;
  Pose3(const Eigen::Quaterniond& q, const Vec3& t)
      : rotation(q.normalized()), translation(t) {}

  static Pose3 identity() { return Pose3(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// Planar pose; theta kept in (-pi, pi]. x forward, y left, yaw CCW.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_);
};

double normalize_angle(double a);  // wraps into (-pi, pi]

// --- SO(3) helpers ---------------------------------------------------------

Mat3 skew(const Vec3& w);
Mat3 exp_so3(const Vec3& w);
Vec3 log_so3(const Mat3& r);  // angle in [0, pi]; throws AngleNearPi near pi
Mat3 left_jacobian_so3(const Vec3& w);
Mat3 left_jacobian_inv_so3(const Vec3& w);

// --- SE(3) core ------------------------------------------------------------

Pose3 exp_se3(const Twist6& v);
Twist6 log_se3(const Pose3& p);  // throws AngleNearPi for angle >= pi - 1e-6

Pose3 compose(const Pose3& a, const Pose3& b);
Pose3 inverse(const Pose3& p);
Vec3 transform_point(const Pose3& p, const Vec3& pt);

inline Pose3 operator*(const Pose3& a, const Pose3& b) { return compose(a, b); }

/// Manifold update p <- p * exp(delta). Right-multiplication keeps the
/// update local to the pose, which is what the factor Jacobians assume.
Pose3 retract(const Pose3& p, const Vec6& delta);

double rotation_angle(const Pose3& p);

/// Adjoint in rotation-first block layout: Ad = [[R, 0], [t^ R, R]].
Mat6 adjoint(const Pose3& p);

/// d/d(delta) log(A * exp(delta)) at delta = 0, i.e. the inverse right
/// Jacobian of SE(3) evaluated at log(A). Closed form incl. the coupling
/// block (Barfoot's Q matrix), series below 1e-6 rad.
Mat6 se3_log_right_jacobian(const Twist6& xi);

// --- SE(2) -----------------------------------------------------------------

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);
/// b expressed in a's frame: a^-1 * b.
Pose2 relative(const Pose2& a, const Pose2& b);

/// Ground-plane projection: keeps x, y and yaw about +z.
Pose2 pose2_from_pose3(const Pose3& p);
Pose3 pose3_from_pose2(const Pose2& p);

}  // namespace aer
