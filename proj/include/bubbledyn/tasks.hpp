#pragma once

#include "bubbledyn/dataset.hpp"
#include "bubbledyn/images.hpp"
#include "bubbledyn/mppi.hpp"
#include "bubbledyn/simulator.hpp"

namespace bubbledyn {

// Per-task action boxes. Units are meters and radians.
ActionBox drawing_action_box(double alpha_impedance = 0.010);
// d_env: current grasp-frame height above the table, recomputed per step.
ActionBox pivoting_action_box(double d_env);

inline constexpr int kCanvasRows = 565, kCanvasCols = 860;  // 1 px = 1 mm

// Top-down board raster. World y runs along the columns; the planar world's
// single cross-track coordinate maps to the row axis.
struct DrawingCanvas {
  BitMask goal;   // D_goal
  Plane board;    // world frame
  double line_y0 = 0.0;      // start of the evaluation line, meters
  double line_length = 0.3;  // meters
  double pen_radius = 1.5e-3;
  double contact_gate = 0.5e-3;  // max tip-to-board distance that inks

  DrawingCanvas();
  // (x, y) world, meters -> (row, col); may fall outside the canvas.
  void world_to_pixel(double x, double y, int* row, int* col) const;
};

DrawingCanvas make_drawing_canvas(double line_length = 0.3);

// Evenly spaced tip goals along the evaluation line, tool axis perpendicular
// to the board and tip on the board plane.
std::vector<GoalSpec> drawing_goal_sequence(const DrawingCanvas& canvas,
                                            int count = 31);

struct TipSample {
  Eigen::Vector3d tip;  // world
  bool in_grasp = true;
};

void rasterize_ink(const std::vector<TipSample>& trajectory,
                   const DrawingCanvas& canvas, BitMask* meas);

struct DrawingScore {
  double on_line = 0.0;   // |meas AND goal| / |meas|, the canonical score
  double coverage = 0.0;  // |meas AND goal| / |goal|
};
DrawingScore drawing_score(const BitMask& meas, const BitMask& goal);

// Absolute wrapped angle difference, degrees in [0, 180].
double pivoting_score(double theta_achieved_deg, double theta_goal_deg);

// Rigid-attachment greedy policy used for drawing data collection: the in-box
// action whose one-step rigid transport lands the tip closest to the goal.
Action4 jacobian_policy_drawing(const PoseAA& grasp, const PoseAA& q_rel,
                                const Eigen::Vector3d& tip_obj,
                                const Eigen::Vector3d& goal_tip,
                                double width, const ActionBox& box);

struct CollectConfig {
  int per_tool = 800;
  double epsilon = 0.15;  // random-action probability, drawing
  int episode_steps = 20;      // drawing steps per episode
  int pivot_episode_steps = 5;
  double alpha_impedance = 0.010;
  double line_length = 0.3;
  uint64_t seed = 0;
};

Dataset collect_drawing_data(const std::vector<ToolShape>& tools,
                             const SimConfig& sim_cfg, const CollectConfig& cfg);
Dataset collect_pivoting_data(const std::vector<ToolShape>& tools,
                              const SimConfig& sim_cfg, const CollectConfig& cfg);

// ---- evaluation ----

struct EvalProtocol {
  int trials = 10;          // per tool
  int max_actions = 10;     // pivoting cap; drawing uses max_draw_actions
  int max_draw_actions = 80;
  double success_band_deg = 4.0;
  double goal_range_deg = 90.0;  // +/- range for pivoting goals
  double line_length = 0.3;
  double alpha_impedance = 0.010;
};

struct TrialRow {
  std::string tool;
  int trial = 0;
  uint64_t seed = 0;
  double score = 0.0;
  std::string termination;
  int steps = 0;
};

struct EvalResults {
  std::string task, model;
  std::vector<TrialRow> rows;

  double mean_score() const;
  double std_score() const;
};

struct EvalContext {
  std::string task;        // "drawing" | "pivoting"
  std::string model_kind;  // membrane | linear | objpose | fixed | jacobian | random
  TactileAutoencoder* ae = nullptr;
  ObjectEncoder* enc = nullptr;
  MembraneDynamicsNet* dyn = nullptr;
  LinearDynamics* lin = nullptr;
  ObjectPoseDynamicsNet* objpose = nullptr;
  std::vector<ToolShape> tools;
  SimConfig sim_cfg;
  EvalProtocol protocol;
  MppiConfig mppi;
  CostConfig cost;
  IcpConfig icp;
  uint64_t seed = 0;
};

// Model kind validity per task: fixed is drawing-only, jacobian pivoting-only.
bool model_valid_for_task(const std::string& model, const std::string& task);

EvalResults run_evaluation(const EvalContext& ctx);

void save_results_csv(const EvalResults& r, const std::string& path);
void save_results_json(const EvalResults& r, const std::string& path);

}  // namespace bubbledyn
