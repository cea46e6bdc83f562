#include "bubbledyn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace bubbledyn {

namespace {
constexpr double kPi = 3.14159265358979323846;

Eigen::Vector3d to_planar(const PoseAA& p) {
  return {p.position.y(), p.position.z(), p.planar_angle()};
}

PoseAA from_planar(const Eigen::Vector3d& q) {
  return PoseAA::planar(q[0], q[1], wrap_angle(q[2]));
}

}  // namespace

bool ToolShape::contains(const Eigen::Vector2d& yz) const {
  size_t n = profile.size();
  for (size_t i = 0; i < n; ++i) {
    Eigen::Vector2d a = profile[i], b = profile[(i + 1) % n];
    Eigen::Vector2d e = b - a;
    if (e.x() * (yz.y() - a.y()) - e.y() * (yz.x() - a.x()) < 0.0) return false;
  }
  return true;
}

double ToolShape::signed_distance(const Eigen::Vector2d& yz) const {
  size_t n = profile.size();
  double max_inside = -1e9;
  double min_outside = 1e9;
  for (size_t i = 0; i < n; ++i) {
    Eigen::Vector2d a = profile[i], b = profile[(i + 1) % n];
    Eigen::Vector2d e = b - a;
    double len = e.norm();
    Eigen::Vector2d t = e / len;
    Eigen::Vector2d nrm(t.y(), -t.x());  // outward for CCW polygon
    double d = nrm.dot(yz - a);
    max_inside = std::max(max_inside, d);
    double proj = std::clamp(t.dot(yz - a), 0.0, len);
    min_outside = std::min(min_outside, (yz - (a + proj * t)).norm());
  }
  return max_inside <= 0.0 ? max_inside : min_outside;
}

std::vector<Eigen::Vector2d> ToolShape::boundary_samples(int per_edge) const {
  std::vector<Eigen::Vector2d> out;
  size_t n = profile.size();
  for (size_t i = 0; i < n; ++i) {
    Eigen::Vector2d a = profile[i], b = profile[(i + 1) % n];
    for (int k = 0; k < per_edge; ++k)
      out.push_back(a + (b - a) * (double(k) / per_edge));
  }
  return out;
}

std::vector<Eigen::Vector2d> ToolShape::area_samples(double spacing) const {
  Eigen::Vector2d lo(1e9, 1e9), hi(-1e9, -1e9);
  for (const auto& p : profile) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Eigen::Vector2d> out;
  for (double y = lo.x(); y <= hi.x(); y += spacing)
    for (double z = lo.y(); z <= hi.y(); z += spacing)
      if (contains({y, z})) out.push_back({y, z});
  return out;
}

double ToolShape::max_extent() const {
  double m = 0.0;
  for (const auto& p : profile) m = std::max(m, p.norm());
  return m;
}

MembraneSimulator::MembraneSimulator(ToolShape tool, SimConfig cfg,
                                     uint64_t seed)
    : tool_(std::move(tool)), cfg_(cfg), render_counter_(seed) {
  boundary_ = tool_.boundary_samples(8);
}

SimState MembraneSimulator::make_grasp(const PoseAA& grasp_world, double width,
                                       double rel_y, double rel_z,
                                       double rel_theta) const {
  SimState s;
  s.grasp_pose = grasp_world.normalized();
  s.width = width;
  PoseAA rel = PoseAA::planar(rel_y, rel_z, rel_theta);
  s.object_pose = pose_compose(s.grasp_pose, rel);
  s.grasp_anchor = s.object_pose;
  return s;
}

double MembraneSimulator::grip_force(double width) const {
  double pen = tool_.extrusion_half_width - width / 2.0;
  pen = std::clamp(pen, 0.0, 0.8 * cfg_.membrane_thickness);
  if (pen <= 0.0) return 0.0;
  double area = 0.0;
  // Footprint area inside the membrane window.
  double wy = kFullRows * cfg_.pixel_pitch, wz = kFullCols * cfg_.pixel_pitch;
  auto samples = tool_.area_samples(1.5e-3);
  int n_in = 0;
  for (const auto& p : samples)
    if (std::abs(p.x()) < wy / 2 && std::abs(p.y()) < wz / 2) ++n_in;
  area = n_in * 1.5e-3 * 1.5e-3;
  double cells = area / (cfg_.pixel_pitch * cfg_.pixel_pitch);
  return cfg_.membrane_k * pen * cells;
}

CameraModel MembraneSimulator::camera(int jaw) const {
  return default_camera(jaw, cfg_.pixel_pitch, cfg_.rest_gap / 2.0);
}

DepthMapPair MembraneSimulator::render_depth_pair(const SimState& s,
                                                  bool with_noise,
                                                  uint64_t noise_seed) const {
  DepthMapPair out(kFullRows, kFullCols);
  double pen = tool_.extrusion_half_width - s.width / 2.0;
  pen = std::clamp(pen, 0.0, 0.8 * cfg_.membrane_thickness);
  if (pen > 0.0 && !s.dropped) {
    // Object pose relative to the grasp frame.
    PoseAA rel = pose_compose(pose_inverse(s.grasp_pose), s.object_pose);
    Eigen::Vector3d q = to_planar(rel);
    double c = std::cos(q[2]), sn = std::sin(q[2]);
    for (int ch = 0; ch < 2; ++ch) {
      CameraModel cam = default_camera(ch, cfg_.pixel_pitch, s.width / 2.0);
      Eigen::Matrix3d r = cam.extrinsic.rotation();
      for (int v = 0; v < kFullRows; ++v)
        for (int u = 0; u < kFullCols; ++u) {
          Eigen::Vector3d img((v + 0.5 - kFullRows / 2.0) * cfg_.pixel_pitch,
                              (u + 0.5 - kFullCols / 2.0) * cfg_.pixel_pitch,
                              0.0);
          Eigen::Vector3d g = r * img + cam.extrinsic.position;
          // grasp-plane point -> object frame
          double dy = g.y() - q[0], dz = g.z() - q[1];
          Eigen::Vector2d obj(c * dy + sn * dz, -sn * dy + c * dz);
          if (tool_.contains(obj)) out.at(ch, v, u) = float(pen);
        }
    }
    // Separable box smoothing.
    int rad = cfg_.smoothing_radius;
    if (rad > 0) {
      DepthMapPair tmp = out;
      for (int ch = 0; ch < 2; ++ch) {
        for (int v = 0; v < kFullRows; ++v)
          for (int u = 0; u < kFullCols; ++u) {
            float acc = 0.f;
            int cnt = 0;
            for (int d = -rad; d <= rad; ++d) {
              int uu = u + d;
              if (uu >= 0 && uu < kFullCols) {
                acc += out.at(ch, v, uu);
                ++cnt;
              }
            }
            tmp.at(ch, v, u) = acc / cnt;
          }
        for (int v = 0; v < kFullRows; ++v)
          for (int u = 0; u < kFullCols; ++u) {
            float acc = 0.f;
            int cnt = 0;
            for (int d = -rad; d <= rad; ++d) {
              int vv = v + d;
              if (vv >= 0 && vv < kFullRows) {
                acc += tmp.at(ch, vv, u);
                ++cnt;
              }
            }
            out.at(ch, v, u) = acc / cnt;
          }
      }
    }
  }
  if (with_noise && cfg_.sensor_noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> nd(0.0, cfg_.sensor_noise_sigma);
    for (auto& v : out.data) v += float(nd(rng));
  }
  return out;
}

double MembraneSimulator::env_penetration_energy(
    const Eigen::Vector3d& q) const {
  double c = std::cos(q[2]), s = std::sin(q[2]);
  double e = 0.0;
  for (const auto& p : boundary_) {
    Eigen::Vector3d w(0.0, q[0] + c * p.x() - s * p.y(),
                      q[1] + s * p.x() + c * p.y());
    double sd = cfg_.env_plane.signed_distance(w);
    if (sd < 0.0) e += 0.5 * cfg_.env_k * sd * sd;
  }
  return e;
}

double MembraneSimulator::energy(const Eigen::Vector3d& q,
                                 const Eigen::Vector3d& anchor, double kt,
                                 double kr) const {
  double dy = q[0] - anchor[0], dz = q[1] - anchor[1];
  double dth = wrap_angle(q[2] - anchor[2]);
  return 0.5 * kt * (dy * dy + dz * dz) + 0.5 * kr * dth * dth +
         env_penetration_energy(q);
}

Eigen::Vector3d MembraneSimulator::energy_grad(const Eigen::Vector3d& q,
                                               const Eigen::Vector3d& anchor,
                                               double kt, double kr) const {
  Eigen::Vector3d g;
  g[0] = kt * (q[0] - anchor[0]);
  g[1] = kt * (q[1] - anchor[1]);
  g[2] = kr * wrap_angle(q[2] - anchor[2]);
  double c = std::cos(q[2]), s = std::sin(q[2]);
  const Eigen::Vector3d n = cfg_.env_plane.normal;
  for (const auto& p : boundary_) {
    double wy = q[0] + c * p.x() - s * p.y();
    double wz = q[1] + s * p.x() + c * p.y();
    Eigen::Vector3d w(0.0, wy, wz);
    double sd = cfg_.env_plane.signed_distance(w);
    if (sd < 0.0) {
      double f = cfg_.env_k * sd;
      // d sd / d(q): translation along plane normal, rotation via point
      // velocity (-sin/cos derivatives).
      double dwy = -s * p.x() - c * p.y();
      double dwz = c * p.x() - s * p.y();
      g[0] += f * n.y();
      g[1] += f * n.z();
      g[2] += f * (n.y() * dwy + n.z() * dwz);
    }
  }
  return g;
}

Eigen::Vector3d MembraneSimulator::minimize_energy(const Eigen::Vector3d& q0,
                                                   const Eigen::Vector3d& anchor,
                                                   double kt, double kr) const {
  Eigen::Vector3d q = q0;
  double e = energy(q, anchor, kt, kr);
  const double h = 1e-7;
  int it = 0;
  for (; it < cfg_.solver_max_iter; ++it) {
    Eigen::Vector3d g = energy_grad(q, anchor, kt, kr);
    // Scaled gradient norm: meters and radians on comparable footing.
    double gnorm = std::sqrt(g[0] * g[0] + g[1] * g[1] + 0.01 * g[2] * g[2]);
    if (gnorm < cfg_.solver_tol * std::max(1.0, kt * 1e-3)) break;
    // Numerical Hessian of the 3-variable objective.
    Eigen::Matrix3d hess;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      hess.col(j) =
          (energy_grad(qp, anchor, kt, kr) - energy_grad(qm, anchor, kt, kr)) /
          (2 * h);
    }
    hess = 0.5 * (hess + hess.transpose());
    double lam = 1e-6 * std::max(1.0, hess.trace());
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::Matrix3d hl = hess + lam * Eigen::Matrix3d::Identity();
      Eigen::Vector3d d = hl.ldlt().solve(-g);
      Eigen::Vector3d qn = q;
      qn += d;
      qn[2] = wrap_angle(qn[2]);
      double en = energy(qn, anchor, kt, kr);
      if (std::isfinite(en) && en <= e) {
        // Monotone descent step.
        if (e - en < 1e-16 * std::max(1.0, e)) {
          q = qn;
          e = en;
          it = cfg_.solver_max_iter;  // converged to machine precision
          accepted = true;
          break;
        }
        q = qn;
        e = en;
        accepted = true;
      } else {
        lam *= 10.0;
      }
    }
    if (!accepted) break;
  }
  Eigen::Vector3d g = energy_grad(q, anchor, kt, kr);
  double gnorm = std::sqrt(g[0] * g[0] + g[1] * g[1] + 0.01 * g[2] * g[2]);
  double scale = std::max(1.0, kt * 1e-3);
  if (gnorm > 1e3 * cfg_.solver_tol * scale) {
    // The raw gradient norm scales with the contact penalty stiffness, so a
    // stalled line search can leave a residual force that still corresponds
    // to a sub-nanometer pose error. Judge convergence by the Newton step
    // the residual implies instead of the residual itself.
    Eigen::Matrix3d hess;
    const double h = 1e-7;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      hess.col(j) =
          (energy_grad(qp, anchor, kt, kr) - energy_grad(qm, anchor, kt, kr)) /
          (2 * h);
    }
    hess = 0.5 * (hess + hess.transpose());
    Eigen::Matrix3d hl =
        hess + 1e-6 * std::max(1.0, hess.trace()) * Eigen::Matrix3d::Identity();
    Eigen::Vector3d step = hl.ldlt().solve(g);
    if (step.norm() > 1e-7)
      throw SolverError("energy solver did not converge, residual " +
                        std::to_string(gnorm) + ", implied step " +
                        std::to_string(step.norm()));
  }
  return q;
}

SimState MembraneSimulator::sim_step(const SimState& s, const Action4& a) const {
  if (s.dropped) return s;
  SimState out = s;

  // Rigid gripper motion from the action.
  PoseAA r_old = s.grasp_pose;
  PoseAA r_new = r_old;
  r_new.position += Eigen::Vector3d(0.0, a.dy, a.dz);
  double phi = r_old.planar_angle() + a.dphi;
  r_new = PoseAA::planar(r_new.position.y(), r_new.position.z(), phi);
  Eigen::Matrix4d motion =
      pose_to_homogeneous(r_new) * pose_to_homogeneous(r_old).inverse();
  auto transport = [&](const PoseAA& p) {
    return pose_from_homogeneous(motion * pose_to_homogeneous(p));
  };
  out.grasp_pose = r_new;
  out.grasp_anchor = transport(s.grasp_anchor);
  out.object_pose = transport(s.object_pose);

  // Width update, clamped so membrane penetration stays below 80% thickness.
  double min_width =
      2.0 * (tool_.extrusion_half_width - 0.8 * cfg_.membrane_thickness);
  out.width = std::max(a.gw, std::max(min_width, 1e-3));

  double grip = grip_force(out.width);
  if (2.0 * grip < cfg_.drop_force) {
    out.dropped = true;
    out.in_contact = false;
    return out;
  }
  double kt = cfg_.tangential_per_newton * grip;
  double kr = cfg_.rotational_per_newton * grip;

  Eigen::Vector3d anchor = to_planar(out.grasp_anchor);
  Eigen::Vector3d q = to_planar(out.object_pose);

  // Patch radius for the torque friction cap.
  double rho = 0.0;
  {
    auto samples = tool_.area_samples(2e-3);
    double acc = 0.0;
    int n = 0;
    double wy = kFullRows * cfg_.pixel_pitch, wz = kFullCols * cfg_.pixel_pitch;
    for (const auto& p : samples)
      if (std::abs(p.x()) < wy / 2 && std::abs(p.y()) < wz / 2) {
        acc += p.squaredNorm();
        ++n;
      }
    rho = n > 0 ? std::sqrt(acc / n) : 5e-3;
  }

  for (int outer = 0; outer < 3; ++outer) {
    q = minimize_energy(q, anchor, kt, kr);
    bool slipped = false;
    // Grasp friction: tangential and torsional elasto-plastic caps.
    Eigen::Vector2d ft(kt * (q[0] - anchor[0]), kt * (q[1] - anchor[1]));
    double fcap = cfg_.mu * 2.0 * grip;
    if (ft.norm() > fcap && ft.norm() > 1e-12) {
      Eigen::Vector2d lim = ft * (fcap / ft.norm());
      anchor[0] = q[0] - lim.x() / kt;
      anchor[1] = q[1] - lim.y() / kt;
      slipped = true;
    }
    double tq = kr * wrap_angle(q[2] - anchor[2]);
    double tcap = cfg_.mu * 2.0 * grip * rho;
    if (std::abs(tq) > tcap) {
      anchor[2] = wrap_angle(q[2] - std::copysign(tcap / kr, tq));
      slipped = true;
    }
    if (!slipped) break;
  }

  out.object_pose = from_planar(q);
  out.grasp_anchor = from_planar(anchor);

  // Environment contact flag from the penalty normal force.
  double c = std::cos(q[2]), sn = std::sin(q[2]);
  double n_env = 0.0;
  for (const auto& p : boundary_) {
    Eigen::Vector3d w(0.0, q[0] + c * p.x() - sn * p.y(),
                      q[1] + sn * p.x() + c * p.y());
    double sd = cfg_.env_plane.signed_distance(w);
    if (sd < 0.0) n_env += cfg_.env_k * (-sd);
  }
  out.in_contact = n_env > 1e-2;
  return out;
}

Wrench6 MembraneSimulator::compute_wrench(const SimState& s) const {
  Wrench6 w;
  if (s.dropped) return w;
  DepthMapPair def = render_depth_pair(s, false, 0);
  PoseAA rel = pose_compose(pose_inverse(s.grasp_pose), s.object_pose);
  PoseAA rel_anchor =
      pose_compose(pose_inverse(s.grasp_pose), s.grasp_anchor);
  Eigen::Vector3d q = to_planar(rel), anchor = to_planar(rel_anchor);
  double grip = grip_force(s.width);
  double kt = cfg_.tangential_per_newton * grip;
  double kr = cfg_.rotational_per_newton * grip;

  // Per-cell normal forces and their positions in the grasp frame.
  struct Cell {
    Eigen::Vector3d pos;
    Eigen::Vector3d normal;  // direction of the cell force on the gripper
    double n;
  };
  std::vector<Cell> cells;
  double n_total = 0.0;
  for (int ch = 0; ch < 2; ++ch) {
    CameraModel cam = default_camera(ch, cfg_.pixel_pitch, s.width / 2.0);
    Eigen::Matrix3d r = cam.extrinsic.rotation();
    Eigen::Vector3d outward = -cam.axis;  // pushes the jaw outward
    for (int v = 0; v < kFullRows; ++v)
      for (int u = 0; u < kFullCols; ++u) {
        double d = def.at(ch, v, u);
        if (d <= 0.0) continue;
        Eigen::Vector3d img((v + 0.5 - kFullRows / 2.0) * cfg_.pixel_pitch,
                            (u + 0.5 - kFullCols / 2.0) * cfg_.pixel_pitch,
                            0.0);
        Cell cell;
        cell.pos = r * img + cam.extrinsic.position;
        cell.normal = outward;
        cell.n = cfg_.membrane_k * d;
        n_total += cell.n;
        cells.push_back(cell);
      }
  }
  if (cells.empty()) return w;

  // Tangential demand from the elastic grasp springs, distributed over cells
  // proportionally to normal force and capped per cell at mu * normal.
  Eigen::Vector2d ft(kt * (q[0] - anchor[0]), kt * (q[1] - anchor[1]));
  double tq = kr * wrap_angle(q[2] - anchor[2]);
  for (const Cell& cell : cells) {
    double share = cell.n / n_total;
    Eigen::Vector2d t = ft * share;
    double cap = cfg_.mu * cell.n;
    if (t.norm() > cap && t.norm() > 1e-15) t *= cap / t.norm();
    Eigen::Vector3d f = cell.normal * cell.n + Eigen::Vector3d(0, t.x(), t.y());
    w.force += f;
    w.torque += cell.pos.cross(f);
  }
  // Torsional grasp spring acts about the grasp-plane normal.
  w.torque.x() += tq;
  return w;
}

double MembraneSimulator::relative_angle(const SimState& s) {
  return wrap_angle(s.object_pose.planar_angle() - s.grasp_pose.planar_angle());
}

ToolShape make_rect_tool(const std::string& name, double width, double length,
                         double half_extrusion) {
  ToolShape t;
  t.name = name;
  double up = length / 3.0, down = 2.0 * length / 3.0;
  t.profile = {{-width / 2, -down}, {width / 2, -down},
               {width / 2, up},     {-width / 2, up}};
  t.extrusion_half_width = half_extrusion;
  t.tip = {0.0, -down};
  return t;
}

ToolShape make_trapezoid_tool(const std::string& name, double top_width,
                              double tip_width, double length,
                              double half_extrusion) {
  ToolShape t;
  t.name = name;
  double up = length / 3.0, down = 2.0 * length / 3.0;
  t.profile = {{-tip_width / 2, -down}, {tip_width / 2, -down},
               {top_width / 2, up},     {-top_width / 2, up}};
  t.extrusion_half_width = half_extrusion;
  t.tip = {0.0, -down};
  return t;
}

ToolShape make_capsule_tool(const std::string& name, double radius,
                            double length, double half_extrusion) {
  ToolShape t;
  t.name = name;
  double up = length / 3.0, down = 2.0 * length / 3.0;
  // Convex polygon approximation of a stadium profile.
  std::vector<Eigen::Vector2d> pts;
  for (int k = 0; k <= 6; ++k) {
    double a = kPi + k * kPi / 6.0;  // bottom cap, (-r,-down) -> (r,-down)
    pts.push_back({radius * std::cos(a), -down + radius * std::sin(a)});
  }
  for (int k = 0; k <= 6; ++k) {
    double a = k * kPi / 6.0;  // top cap, (r,up) -> (-r,up)
    pts.push_back({radius * std::cos(a), up + radius * std::sin(a)});
  }
  // Deduplicate and ensure CCW ordering.
  t.profile.clear();
  for (const auto& p : pts)
    if (t.profile.empty() || (t.profile.back() - p).norm() > 1e-9)
      t.profile.push_back(p);
  double area2 = 0.0;
  for (size_t i = 0; i < t.profile.size(); ++i) {
    auto& a = t.profile[i];
    auto& b = t.profile[(i + 1) % t.profile.size()];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  if (area2 < 0) std::reverse(t.profile.begin(), t.profile.end());
  t.extrusion_half_width = half_extrusion;
  t.tip = {0.0, -down - radius};
  return t;
}

ToolShape make_wedge_tool(const std::string& name, double width, double length,
                          double half_extrusion) {
  ToolShape t;
  t.name = name;
  double up = length / 3.0, down = 2.0 * length / 3.0;
  t.profile = {{0.0, -down}, {width / 2, up}, {-width / 2, up}};
  t.extrusion_half_width = half_extrusion;
  t.tip = {0.0, -down};
  return t;
}

std::vector<ToolShape> drawing_tool_set() {
  return {
      make_trapezoid_tool("marker_a", 0.018, 0.006, 0.105, 0.0115),
      make_trapezoid_tool("marker_b", 0.016, 0.005, 0.110, 0.0105),
      make_rect_tool("marker_c", 0.014, 0.100, 0.0120),
      make_capsule_tool("marker_d", 0.0075, 0.095, 0.0110),
      make_trapezoid_tool("marker_e", 0.020, 0.008, 0.100, 0.0125),
      // held-out tools
      make_trapezoid_tool("marker_f", 0.017, 0.0055, 0.108, 0.0112),
      make_rect_tool("marker_g", 0.013, 0.104, 0.0118),
      make_capsule_tool("marker_h", 0.0070, 0.098, 0.0108),
  };
}

std::vector<ToolShape> pivoting_tool_set() {
  return {
      make_rect_tool("stick_a", 0.016, 0.090, 0.0115),
      make_rect_tool("stick_b", 0.014, 0.100, 0.0125),
      make_capsule_tool("stick_c", 0.008, 0.092, 0.0110),
      make_trapezoid_tool("stick_d", 0.016, 0.010, 0.090, 0.0120),
      make_rect_tool("stick_e", 0.020, 0.082, 0.0105),
      // held-out tools
      make_rect_tool("stick_f", 0.015, 0.095, 0.0118),
      make_capsule_tool("stick_g", 0.0075, 0.088, 0.0112),
      make_trapezoid_tool("stick_h", 0.014, 0.009, 0.094, 0.0122),
  };
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario " + path);
  nlohmann::json j;
  f >> j;
  Scenario sc;
  sc.tool.name = j["tool"].value("name", "tool");
  for (const auto& v : j["tool"]["profile"])
    sc.tool.profile.push_back({v[0].get<double>(), v[1].get<double>()});
  sc.tool.extrusion_half_width = j["tool"]["extrusion_half_width"];
  sc.tool.tip = {j["tool"]["tip"][0].get<double>(),
                 j["tool"]["tip"][1].get<double>()};
  auto& c = j["config"];
  sc.cfg.membrane_k = c.value("membrane_k", sc.cfg.membrane_k);
  sc.cfg.mu = c.value("mu", sc.cfg.mu);
  sc.cfg.mu_env = c.value("mu_env", sc.cfg.mu_env);
  sc.cfg.pixel_pitch = c.value("pixel_pitch", sc.cfg.pixel_pitch);
  sc.cfg.smoothing_radius = c.value("smoothing_radius", sc.cfg.smoothing_radius);
  sc.cfg.sensor_noise_sigma =
      c.value("sensor_noise_sigma", sc.cfg.sensor_noise_sigma);
  sc.cfg.solver_tol = c.value("solver_tol", sc.cfg.solver_tol);
  sc.cfg.solver_max_iter = c.value("solver_max_iter", sc.cfg.solver_max_iter);
  auto& st = j["initial"];
  sc.initial.grasp_pose = PoseAA::planar(st["grasp"][0], st["grasp"][1],
                                         st["grasp"][2]);
  sc.initial.width = st["width"];
  double ry = st.value("rel_y", 0.0), rz = st.value("rel_z", 0.0);
  double rt = st.value("rel_theta", 0.0);
  sc.initial.object_pose =
      pose_compose(sc.initial.grasp_pose, PoseAA::planar(ry, rz, rt));
  sc.initial.grasp_anchor = sc.initial.object_pose;
  return sc;
}

void save_scenario(const Scenario& s, const std::string& path) {
  nlohmann::json j;
  j["tool"]["name"] = s.tool.name;
  for (const auto& p : s.tool.profile)
    j["tool"]["profile"].push_back({p.x(), p.y()});
  j["tool"]["extrusion_half_width"] = s.tool.extrusion_half_width;
  j["tool"]["tip"] = {s.tool.tip.x(), s.tool.tip.y()};
  j["config"]["membrane_k"] = s.cfg.membrane_k;
  j["config"]["mu"] = s.cfg.mu;
  j["config"]["mu_env"] = s.cfg.mu_env;
  j["config"]["pixel_pitch"] = s.cfg.pixel_pitch;
  j["config"]["smoothing_radius"] = s.cfg.smoothing_radius;
  j["config"]["sensor_noise_sigma"] = s.cfg.sensor_noise_sigma;
  j["config"]["solver_tol"] = s.cfg.solver_tol;
  j["config"]["solver_max_iter"] = s.cfg.solver_max_iter;
  PoseAA rel =
      pose_compose(pose_inverse(s.initial.grasp_pose), s.initial.object_pose);
  j["initial"]["grasp"] = {s.initial.grasp_pose.position.y(),
                           s.initial.grasp_pose.position.z(),
                           s.initial.grasp_pose.planar_angle()};
  j["initial"]["width"] = s.initial.width;
  j["initial"]["rel_y"] = rel.position.y();
  j["initial"]["rel_z"] = rel.position.z();
  j["initial"]["rel_theta"] = rel.planar_angle();
  std::ofstream f(path);
  f << j.dump(2) << "\n";
}

}  // namespace bubbledyn
