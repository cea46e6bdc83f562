#pragma once

#include <random>

#include "bubbledyn/depth_map.hpp"
#include "bubbledyn/simulator.hpp"
#include "bubbledyn/tactile.hpp"

namespace bubbledyn {

// Membrane points attributed to object contact, grasp frame.
struct Imprint {
  std::vector<Eigen::Vector3d> points;
  std::vector<float> deformation;

  size_t size() const { return points.size(); }
};

struct IcpConfig {
  int iterations = 20;
  double init_cone_deg = 20.0;
  double tol = 1e-6;  // meters, early convergence on transform change
  int max_imprint_points = 400;
  int max_model_points = 160;
};

struct ContactConfig {
  double wrench_threshold = 1.5;  // N along the environment normal
  Plane env_plane;                // world frame
};

// Point-cloud geometry of the grasped tool plus metadata.
struct ObjectModel {
  std::string name;
  PointCloud cloud;  // grasp-plane samples, object frame, x = 0
  Eigen::Vector3d tip = Eigen::Vector3d::Zero();
  double extent = 0.0;
};

// Cloud restricted to the membrane window so ICP only sees geometry the
// imprint can actually explain.
ObjectModel model_from_tool(const ToolShape& tool, double spacing = 1.5e-3,
                            double window_y = 0.0175, double window_z = 0.014);
// Full-extent cloud, used by the pose cost.
ObjectModel full_model_from_tool(const ToolShape& tool, double spacing = 2.0e-3);

enum class ObsStatus { ok, no_imprint, degenerate_imprint };

constexpr double kImprintMinDeform = 0.0015;  // meters, ~15x the sensor noise
constexpr double kImprintTopFraction = 0.10;  // of all membrane pixels
constexpr double kImprintClusterRadius = 0.015;

ObsStatus extract_imprint(const DepthMapPair& def, const CameraModel& left,
                          const CameraModel& right, Imprint* out);

ObsStatus icp_fit(const Imprint& imprint, const ObjectModel& model,
                  const IcpConfig& cfg, std::mt19937_64& rng, PoseAA* out,
                  double* mse = nullptr);

bool detect_contact(const Wrench6& w, const Eigen::Vector3d& env_normal,
                    double threshold = 1.5);

// Translate q along the plane normal so the closest model point touches the
// plane exactly (orientation unchanged).
PoseAA project_to_contact_manifold(const PoseAA& q, const ObjectModel& model,
                                   const Plane& env);

// Object pose + transmitted wrench: the controlled quantity.
struct TaskState {
  PoseAA q;  // grasp frame
  Wrench6 w;
};

ObsStatus observe(const MembraneState& s, const ObjectModel& model,
                  const CameraModel& left, const CameraModel& right,
                  const ContactConfig& contact, const IcpConfig& icp,
                  std::mt19937_64& rng, TaskState* out);

}  // namespace bubbledyn
