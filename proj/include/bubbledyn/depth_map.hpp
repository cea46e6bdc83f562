#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "bubbledyn/geometry.hpp"

namespace bubbledyn {

inline constexpr int kRawRows = 224, kRawCols = 171;
inline constexpr int kFullRows = 175, kFullCols = 140;
inline constexpr int kPoolRows = 25, kPoolCols = 20;
inline constexpr int kPoolFactor = 7;
inline constexpr int kCropRowOffset = 24, kCropColOffset = 15;

// Two-channel depth image, one channel per gripper jaw. Values are meters.
struct DepthMapPair {
  int rows = 0, cols = 0;
  std::vector<float> data;  // 2 * rows * cols, channel-major

  DepthMapPair() = default;
  DepthMapPair(int r, int c) : rows(r), cols(c), data(2 * size_t(r) * c, 0.f) {}

  float& at(int ch, int r, int c) {
    return data[(size_t(ch) * rows + r) * cols + c];
  }
  float at(int ch, int r, int c) const {
    return data[(size_t(ch) * rows + r) * cols + c];
  }
  size_t size() const { return data.size(); }
};

// Dynamic state s = (tactile signature p, external wrench w, grasp pose r).
struct MembraneState {
  DepthMapPair tactile;  // pooled 2 x 25 x 20 by convention
  Wrench6 wrench;
  PoseAA grasp_pose;
};

struct Transition {
  MembraneState s;
  int object_id = 0;
  Action4 action;
  MembraneState s_next;
  // Side information recorded by the simulator at collection time.
  PoseAA q_obs, q_obs_next;    // observation-model estimate, grasp frame
  PoseAA q_true, q_true_next;  // simulator ground truth, grasp frame
};

}  // namespace bubbledyn
