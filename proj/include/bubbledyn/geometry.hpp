#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace bubbledyn {

// Position + axis-angle orientation. The axis-angle magnitude is kept in
// [0, pi]; equivalent rotations are normalized to a unique representative.
struct PoseAA {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_angle = Eigen::Vector3d::Zero();

  static PoseAA identity() { return {}; }
  static PoseAA planar(double y, double z, double theta) {
    PoseAA p;
    p.position = {0.0, y, z};
    p.axis_angle = {theta, 0.0, 0.0};
    return p.normalized();
  }

  // In-plane rotation about the grasp-plane normal (x axis).
  double planar_angle() const;

  PoseAA normalized() const;
  Eigen::Matrix3d rotation() const;
  Eigen::Matrix<double, 6, 1> vec6() const {
    Eigen::Matrix<double, 6, 1> v;
    v << position, axis_angle;
    return v;
  }
  static PoseAA from_vec6(const Eigen::Matrix<double, 6, 1>& v) {
    PoseAA p;
    p.position = v.head<3>();
    p.axis_angle = v.tail<3>();
    return p.normalized();
  }
};

Eigen::Matrix4d pose_to_homogeneous(const PoseAA& p);
PoseAA pose_from_homogeneous(const Eigen::Matrix4d& h);
PoseAA pose_compose(const PoseAA& a, const PoseAA& b);
PoseAA pose_inverse(const PoseAA& a);
Eigen::Vector3d pose_apply(const PoseAA& p, const Eigen::Vector3d& x);

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);
// Absolute angular difference in degrees, in [0, 180].
double angle_diff_deg(double a_deg, double b_deg);

struct Wrench6 {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 6, 1> vec6() const {
    Eigen::Matrix<double, 6, 1> v;
    v << force, torque;
    return v;
  }
  static Wrench6 from_vec6(const Eigen::Matrix<double, 6, 1>& v) {
    return {v.head<3>(), v.tail<3>()};
  }
};

// Gripper width + planar grasp-frame displacement + in-plane rotation.
struct Action4 {
  double gw = 0.0;    // grasp width, meters
  double dy = 0.0;    // meters
  double dz = 0.0;    // meters
  double dphi = 0.0;  // radians

  Eigen::Vector4d vec4() const { return {gw, dy, dz, dphi}; }
  static Action4 from_vec4(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], v[3]};
  }
};

// Axis-aligned box of valid actions, one [lo, hi] pair per dimension.
struct ActionBox {
  Eigen::Vector4d lo = Eigen::Vector4d::Zero();
  Eigen::Vector4d hi = Eigen::Vector4d::Zero();

  Eigen::Vector4d mean() const { return 0.5 * (lo + hi); }
  Eigen::Vector4d half_range() const { return 0.5 * (hi - lo); }
  Eigen::Vector4d clip(const Eigen::Vector4d& a) const {
    return a.cwiseMax(lo).cwiseMin(hi);
  }
  bool contains(const Eigen::Vector4d& a, double tol = 1e-9) const {
    return (a.array() >= lo.array() - tol).all() &&
           (a.array() <= hi.array() + tol).all();
  }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::string frame;
};

struct Plane {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();

  double signed_distance(const Eigen::Vector3d& x) const {
    return normal.dot(x - point);
  }
};

}  // namespace bubbledyn
