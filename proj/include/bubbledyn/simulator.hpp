#pragma once

#include <optional>
#include <random>
#include <string>

#include "bubbledyn/depth_map.hpp"
#include "bubbledyn/geometry.hpp"
#include "bubbledyn/tactile.hpp"

namespace bubbledyn {

// Convex 2D cross-section in the grasp plane (object-frame y-z coordinates),
// extruded along x. The tip marks the drawing end of the tool.
struct ToolShape {
  std::string name;
  std::vector<Eigen::Vector2d> profile;  // CCW convex polygon, meters
  double extrusion_half_width = 0.012;   // meters, along x
  Eigen::Vector2d tip = {0.0, 0.0};      // object frame (y, z)

  bool contains(const Eigen::Vector2d& yz) const;
  // Signed distance of a y-z point to the profile (negative inside).
  double signed_distance(const Eigen::Vector2d& yz) const;
  // Boundary samples used for environment contact checks.
  std::vector<Eigen::Vector2d> boundary_samples(int per_edge = 8) const;
  // Interior area samples (object-frame y-z), used as the object model cloud.
  std::vector<Eigen::Vector2d> area_samples(double spacing) const;
  double max_extent() const;
};

struct SimConfig {
  double membrane_k = 0.6;         // N/m per cell normal stiffness
  double mu = 0.55;                // object-membrane friction
  double mu_env = 0.25;            // object-environment friction
  double pixel_pitch = 2.0e-4;     // meters/pixel, 175x140 grid
  double rest_gap = 0.046;         // jaw face separation at gw reference
  double membrane_thickness = 0.012;
  Plane env_plane;                 // world frame, default z=0 with +z normal
  int smoothing_radius = 2;        // pixels
  double sensor_noise_sigma = 1.0e-4;  // meters
  double tangential_per_newton = 220.0;    // shear stiffness per N of grip
  double rotational_per_newton = 0.030;    // torsion stiffness per N of grip
  double env_k = 1.0e7;            // N/m per boundary sample
  double drop_force = 0.5;         // N
  double solver_tol = 1e-7;        // gradient norm tolerance
  int solver_max_iter = 4000;
};

struct SimState {
  PoseAA grasp_pose;   // world frame, planar
  PoseAA object_pose;  // world frame, planar
  double width = 0.03; // meters
  bool in_contact = false;
  bool dropped = false;
  // Elastic grasp anchor: object pose the membranes "remember", world frame.
  PoseAA grasp_anchor;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class MembraneSimulator {
 public:
  MembraneSimulator(ToolShape tool, SimConfig cfg, uint64_t seed = 0);

  const ToolShape& tool() const { return tool_; }
  const SimConfig& config() const { return cfg_; }

  // Place the tool rigidly in the gripper at a relative planar pose.
  SimState make_grasp(const PoseAA& grasp_world, double width,
                      double rel_y, double rel_z, double rel_theta) const;

  // Noise-free deformation maps (left/right), full 175x140 resolution.
  DepthMapPair render_depth_pair(const SimState& s, bool with_noise,
                                 uint64_t noise_seed) const;
  DepthMapPair render_depth_pair(const SimState& s) const {
    return render_depth_pair(s, true, render_counter_++);
  }

  Wrench6 compute_wrench(const SimState& s) const;

  SimState sim_step(const SimState& s, const Action4& a) const;

  // Grip squeeze normal force per membrane for a given width.
  double grip_force(double width) const;

  // Energy of the quasi-static objective at planar object pose q = (y, z,
  // theta), given the anchor and grip stiffnesses. Exposed for oracles.
  double energy(const Eigen::Vector3d& q, const Eigen::Vector3d& anchor,
                double kt, double kr) const;

  // Tool angle relative to the grasp frame, radians.
  static double relative_angle(const SimState& s);

  CameraModel camera(int jaw) const;

 private:
  Eigen::Vector3d minimize_energy(const Eigen::Vector3d& q0,
                                  const Eigen::Vector3d& anchor, double kt,
                                  double kr) const;
  Eigen::Vector3d energy_grad(const Eigen::Vector3d& q,
                              const Eigen::Vector3d& anchor, double kt,
                              double kr) const;
  double env_penetration_energy(const Eigen::Vector3d& q) const;

  ToolShape tool_;
  SimConfig cfg_;
  std::vector<Eigen::Vector2d> boundary_;
  mutable uint64_t render_counter_ = 0;
};

// Built-in tool families.
ToolShape make_rect_tool(const std::string& name, double width, double length,
                         double half_extrusion);
ToolShape make_trapezoid_tool(const std::string& name, double top_width,
                              double tip_width, double length,
                              double half_extrusion);
ToolShape make_capsule_tool(const std::string& name, double radius,
                            double length, double half_extrusion);
ToolShape make_wedge_tool(const std::string& name, double width, double length,
                          double half_extrusion);

// Tool sets used by the tasks (index 0..7; first 5 are train tools).
std::vector<ToolShape> drawing_tool_set();
std::vector<ToolShape> pivoting_tool_set();

// Scenario file (JSON): tool profile, config fields, initial state.
struct Scenario {
  ToolShape tool;
  SimConfig cfg;
  SimState initial;
};
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

}  // namespace bubbledyn
