#pragma once

#include <functional>
#include <random>

#include "bubbledyn/baselines.hpp"

namespace bubbledyn {

struct MppiConfig {
  int horizon = 2;
  int samples = 100;
  double lambda = 0.01;
  double sigma_scale = 0.3;  // of the per-dimension action half-range
};

// Weights bring the meter-squared costs to O(1) so the softmax temperature
// lambda actually discriminates between sampled trajectories.
struct CostConfig {
  double w_pose = 100.0;
  double w_tip = 1000.0;
  double failure_cost = 1e9;  // per failed rollout step
};

struct GoalSpec {
  enum class Kind { pose, tip_point };
  Kind kind = Kind::pose;
  PoseAA q_goal;                 // grasp frame, Kind::pose
  Eigen::Vector3d tip_target{};  // world frame, Kind::tip_point
};

// Mean squared displacement of the model points between the two poses.
double object_pose_cost(const PoseAA& q, const PoseAA& q_goal,
                        const std::vector<Eigen::Vector3d>& points);

double task_cost(const RolloutState& s, const GoalSpec& goal,
                 const ObjectModel& model, const CostConfig& cost);

// One importance-sampled update of the nominal sequence; returns the first
// nominal action. `nominal` is resized to the horizon (box mean) on first use
// and shifted left afterwards, so each call performs a single iteration.
Action4 mppi_step(
    const std::function<double(const std::vector<Action4>&)>& traj_cost,
    const ActionBox& box, const MppiConfig& cfg, std::vector<Action4>* nominal,
    std::mt19937_64& rng);

// mppi_step wired to a forward model: the trajectory cost is the sum of task
// costs along the rollout.
Action4 control_step(StepModel& model, const RolloutState& s,
                     const GoalSpec& goal, const ObjectModel& obj,
                     const ActionBox& box, const CostConfig& cost,
                     const MppiConfig& cfg, std::vector<Action4>* nominal,
                     std::mt19937_64& rng);

}  // namespace bubbledyn
