#include "bubbledyn/geometry.hpp"

#include <cmath>

namespace bubbledyn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

double angle_diff_deg(double a_deg, double b_deg) {
  double d = std::fabs(wrap_angle((a_deg - b_deg) * kPi / 180.0)) * 180.0 / kPi;
  return d;
}

PoseAA PoseAA::normalized() const {
  PoseAA out = *this;
  double angle = axis_angle.norm();
  if (angle < 1e-14) {
    out.axis_angle.setZero();
    return out;
  }
  Eigen::Vector3d axis = axis_angle / angle;
  angle = std::fmod(angle, 2.0 * kPi);
  if (angle > kPi) {
    angle = 2.0 * kPi - angle;
    axis = -axis;
  }
  out.axis_angle = axis * angle;
  return out;
}

Eigen::Matrix3d PoseAA::rotation() const {
  double angle = axis_angle.norm();
  if (angle < 1e-14) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

double PoseAA::planar_angle() const {
  Eigen::Matrix3d r = rotation();
  return std::atan2(r(2, 1), r(1, 1));
}

Eigen::Matrix4d pose_to_homogeneous(const PoseAA& p) {
  Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
  h.topLeftCorner<3, 3>() = p.rotation();
  h.topRightCorner<3, 1>() = p.position;
  return h;
}

PoseAA pose_from_homogeneous(const Eigen::Matrix4d& h) {
  PoseAA p;
  p.position = h.topRightCorner<3, 1>();
  Eigen::AngleAxisd aa(h.topLeftCorner<3, 3>());
  p.axis_angle = aa.axis() * aa.angle();
  return p.normalized();
}

PoseAA pose_compose(const PoseAA& a, const PoseAA& b) {
  return pose_from_homogeneous(pose_to_homogeneous(a) * pose_to_homogeneous(b));
}

PoseAA pose_inverse(const PoseAA& a) {
  Eigen::Matrix3d r = a.rotation();
  PoseAA out;
  Eigen::Matrix3d rt = r.transpose();
  out.position = -(rt * a.position);
  Eigen::AngleAxisd aa(rt);
  out.axis_angle = aa.axis() * aa.angle();
  return out.normalized();
}

Eigen::Vector3d pose_apply(const PoseAA& p, const Eigen::Vector3d& x) {
  return p.rotation() * x + p.position;
}

}  // namespace bubbledyn
