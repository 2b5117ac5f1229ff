#include "aerialign/geometry.hpp"

#include <cmath>

namespace aer {

namespace {
constexpr double kSmallAngle = 1e-8;  // series switch for exp/log
constexpr double kSmallJac = 1e-5;    // series switch for SO(3) Jacobians
constexpr double kSmallQ = 1e-3;      // series switch for the Q block
}  // namespace

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

Pose2::Pose2(double x_, double y_, double theta_)
    : x(x_), y(y_), theta(normalize_angle(theta_)) {}

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Mat3 exp_so3(const Vec3& w) {
  double theta = w.norm();
  Mat3 wx = skew(w);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + wx + 0.5 * wx * wx;
  }
  double s = std::sin(theta) / theta;
  double half_sin = std::sin(0.5 * theta);
  double c = 2.0 * half_sin * half_sin / (theta * theta);
  return Mat3::Identity() + s * wx + c * wx * wx;
}

Vec3 log_so3(const Mat3& r) {
  double tr = r.trace();
  double cos_theta = std::min(1.0, std::max(-1.0, (tr - 1.0) * 0.5));
  double theta = std::acos(cos_theta);
  if (theta > M_PI - 1e-6) {
    throw AngleNearPi("rotation angle within 1e-6 of pi, log is ill-defined");
  }
  Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < kSmallAngle) {
    return 0.5 * axis;  // first-order: log(R) ~ (R - R^T)^vee / 2
  }
  return theta / (2.0 * std::sin(theta)) * axis;
}

Mat3 left_jacobian_so3(const Vec3& w) {
  double theta = w.norm();
  Mat3 wx = skew(w);
  if (theta < kSmallJac) {
    return Mat3::Identity() + 0.5 * wx + wx * wx / 6.0;
  }
  double t2 = theta * theta;
  double half_sin = std::sin(0.5 * theta);
  double a = 2.0 * half_sin * half_sin / t2;
  double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * wx + b * wx * wx;
}

Mat3 left_jacobian_inv_so3(const Vec3& w) {
  double theta = w.norm();
  Mat3 wx = skew(w);
  if (theta < kSmallJac) {
    return Mat3::Identity() - 0.5 * wx + wx * wx / 12.0;
  }
  double half = 0.5 * theta;
  double b = (1.0 - half / std::tan(half)) / (theta * theta);
  return Mat3::Identity() - 0.5 * wx + b * wx * wx;
}

namespace {

// Coupling block of the SE(3) left Jacobian (Barfoot's Q matrix) for the
// tangent [w | v]; linear in v. Validated against the adjoint-series
// Jacobian in the unit tests.
Mat3 se3_q(const Vec3& w, const Vec3& v) {
  double theta = w.norm();
  Mat3 wx = skew(w);
  Mat3 vx = skew(v);
  Mat3 wv = wx * vx;
  Mat3 vw = vx * wx;
  Mat3 wvw = wv * wx;
  double c1, c2, c3;
  if (theta < kSmallQ) {
    double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = -1.0 / 24.0 + t2 / 720.0;
    c3 = -1.0 / 60.0 + t2 / 1260.0;
  } else {
    double t2 = theta * theta;
    double t3 = t2 * theta;
    double t4 = t3 * theta;
    double t5 = t4 * theta;
    double st = std::sin(theta);
    double ct = std::cos(theta);
    c1 = (theta - st) / t3;
    c2 = (1.0 - 0.5 * t2 - ct) / t4;
    c3 = c2 - 3.0 * (theta - st - t3 / 6.0) / t5;
  }
  return 0.5 * vx + c1 * (wv + vw + wvw) - c2 * (wx * wv + vw * wx - 3.0 * wvw) -
         0.5 * c3 * (wvw * wx + wx * wvw);
}

}  // namespace

Pose3 exp_se3(const Twist6& v) {
  Mat3 r = exp_so3(v.rot);
  Vec3 t = left_jacobian_so3(v.rot) * v.trans;
  return Pose3(Eigen::Quaterniond(r), t);
}

Twist6 log_se3(const Pose3& p) {
  Vec3 w = log_so3(p.rotation.toRotationMatrix());
  Vec3 v = left_jacobian_inv_so3(w) * p.translation;
  return Twist6(w, v);
}

Pose3 compose(const Pose3& a, const Pose3& b) {
  return Pose3(a.rotation * b.rotation,
               a.rotation * b.translation + a.translation);
}

Pose3 inverse(const Pose3& p) {
  Eigen::Quaterniond qi = p.rotation.conjugate();
  return Pose3(qi, qi * (-p.translation));
}

Vec3 transform_point(const Pose3& p, const Vec3& pt) {
  return p.rotation * pt + p.translation;
}

Pose3 retract(const Pose3& p, const Vec6& delta) {
  return compose(p, exp_se3(Twist6(delta)));
}

double rotation_angle(const Pose3& p) {
  double w = std::min(1.0, std::abs(p.rotation.w()));
  return 2.0 * std::acos(w);
}

Mat6 adjoint(const Pose3& p) {
  Mat3 r = p.rotation.toRotationMatrix();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = skew(p.translation) * r;
  return ad;
}

Mat6 se3_log_right_jacobian(const Twist6& xi) {
  // Right Jacobian of SE(3) at xi equals the left Jacobian at -xi;
  // invert blockwise: inv([[J,0],[Q,J]]) = [[Ji,0],[-Ji Q Ji, Ji]].
  Vec3 w = -xi.rot;
  Vec3 v = -xi.trans;
  Mat3 ji = left_jacobian_inv_so3(w);
  Mat3 q = se3_q(w, v);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = ji;
  out.bottomRightCorner<3, 3>() = ji;
  out.bottomLeftCorner<3, 3>() = -ji * q * ji;
  return out;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  double c = std::cos(a.theta);
  double s = std::sin(a.theta);
  return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
               a.theta + b.theta);
}

Pose2 inverse(const Pose2& p) {
  double c = std::cos(p.theta);
  double s = std::sin(p.theta);
  return Pose2(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta);
}

Pose2 relative(const Pose2& a, const Pose2& b) { return compose(inverse(a), b); }

Pose2 pose2_from_pose3(const Pose3& p) {
  Mat3 r = p.rotation.toRotationMatrix();
  double yaw = std::atan2(r(1, 0), r(0, 0));
  return Pose2(p.translation.x(), p.translation.y(), yaw);
}

Pose3 pose3_from_pose2(const Pose2& p) {
  Eigen::Quaterniond q(Eigen::AngleAxisd(p.theta, Vec3::UnitZ()));
  return Pose3(q, Vec3(p.x, p.y, 0.0));
}

}  // namespace aer
