#pragma once

#include "bubbledyn/depth_map.hpp"
#include "bubbledyn/geometry.hpp"

namespace bubbledyn {

// Orthographic per-jaw camera: pixel (row, col) maps to a point on the rest
// membrane plane via the extrinsic pose, depth offsets move the point along
// the camera axis (toward the camera for positive deformation).
struct CameraModel {
  PoseAA extrinsic;  // camera -> grasp frame
  double pixel_pitch = 2.0e-4;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();  // viewing axis, grasp frame
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 224x171 raw signature -> 175x140 centered crop.
DepthMapPair crop_raw(const DepthMapPair& raw);

// Pixel-wise meas - ref; positive = membrane moved toward the camera.
DepthMapPair deformation_map(const DepthMapPair& meas, const DepthMapPair& ref);

// 175x140 -> 25x20 average pooling with 7x7 blocks.
DepthMapPair downsample(const DepthMapPair& m);

// 25x20 -> 175x140 bilinear interpolation, cell-center (align-corners-false)
// convention, border replication.
DepthMapPair upsample(const DepthMapPair& m);

struct ProjectedPoint {
  Eigen::Vector3d point;  // grasp frame
  float deformation = 0.f;
  int channel = 0, row = 0, col = 0;
};

// One 3D point per pixel of a full-resolution deformation pair.
std::vector<ProjectedPoint> depth_to_pointcloud(
    const DepthMapPair& def, const CameraModel& left, const CameraModel& right);

// Default jaw cameras for a given membrane patch geometry.
CameraModel default_camera(int jaw, double pixel_pitch, double rest_offset);

}  // namespace bubbledyn
