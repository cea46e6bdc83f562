#include "bubbledyn/mppi.hpp"

namespace bubbledyn {

double object_pose_cost(const PoseAA& q, const PoseAA& q_goal,
                        const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) return 0.0;
  Eigen::Matrix4d h = pose_to_homogeneous(q);
  Eigen::Matrix4d hg = pose_to_homogeneous(q_goal);
  double acc = 0.0;
  for (const auto& p : points) {
    Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
    acc += ((h - hg) * ph).head<3>().squaredNorm();
  }
  return acc / double(points.size());
}

double task_cost(const RolloutState& s, const GoalSpec& goal,
                 const ObjectModel& model, const CostConfig& cost) {
  if (s.failed) return cost.failure_cost;
  switch (goal.kind) {
    case GoalSpec::Kind::pose:
      return cost.w_pose * object_pose_cost(s.q, goal.q_goal, model.cloud.points);
    case GoalSpec::Kind::tip_point: {
      // World-frame tool tip through grasp pose and grasp-frame object pose.
      Eigen::Vector4d tip(model.tip.x(), model.tip.y(), model.tip.z(), 1.0);
      Eigen::Vector3d world =
          (pose_to_homogeneous(s.r) * pose_to_homogeneous(s.q) * tip).head<3>();
      return cost.w_tip * (world - goal.tip_target).squaredNorm();
    }
  }
  return 0.0;
}

Action4 mppi_step(
    const std::function<double(const std::vector<Action4>&)>& traj_cost,
    const ActionBox& box, const MppiConfig& cfg, std::vector<Action4>* nominal,
    std::mt19937_64& rng) {
  const int T = cfg.horizon, N = cfg.samples;
  if (int(nominal->size()) != T) nominal->assign(T, Action4::from_vec4(box.mean()));

  Eigen::Vector4d half = box.half_range();
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<Action4>> seqs(N, std::vector<Action4>(T));
  std::vector<double> costs(N);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      Eigen::Vector4d v = (*nominal)[t].vec4();
      for (int k = 0; k < 4; ++k)
        v[k] += cfg.sigma_scale * half[k] * gauss(rng);
      seqs[i][t] = Action4::from_vec4(box.clip(v));
    }
    costs[i] = traj_cost(seqs[i]);
  }

  double mn = *std::min_element(costs.begin(), costs.end());
  std::vector<double> w(N);
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    w[i] = std::exp(-(costs[i] - mn) / cfg.lambda);
    total += w[i];
  }

  std::vector<Action4> updated(T);
  for (int t = 0; t < T; ++t) {
    Eigen::Vector4d v = Eigen::Vector4d::Zero();
    for (int i = 0; i < N; ++i) v += (w[i] / total) * seqs[i][t].vec4();
    updated[t] = Action4::from_vec4(box.clip(v));
  }

  Action4 out = updated[0];
  // Shift left for the next call and refill the tail with the box mean.
  for (int t = 0; t + 1 < T; ++t) (*nominal)[t] = updated[t + 1];
  (*nominal)[T - 1] = Action4::from_vec4(box.mean());
  return out;
}

Action4 control_step(StepModel& model, const RolloutState& s,
                     const GoalSpec& goal, const ObjectModel& obj,
                     const ActionBox& box, const CostConfig& cost,
                     const MppiConfig& cfg, std::vector<Action4>* nominal,
                     std::mt19937_64& rng) {
  auto traj_cost = [&](const std::vector<Action4>& seq) {
    RolloutState cur = s;
    double acc = 0.0;
    for (const auto& a : seq) {
      cur = model.step(cur, a);
      acc += task_cost(cur, goal, obj, cost);
    }
    return acc;
  };
  return mppi_step(traj_cost, box, cfg, nominal, rng);
}

}  // namespace bubbledyn
