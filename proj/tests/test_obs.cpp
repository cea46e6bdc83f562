#include <random>

#include "bubbledyn/observation.hpp"
#include "bubbledyn/tactile.hpp"
#include "doctest.h"

using namespace bubbledyn;

namespace {
constexpr double kPi = 3.14159265358979323846;

Imprint synthetic_imprint(const ObjectModel& model, const PoseAA& q,
                          double noise_sigma, uint64_t seed) {
  Imprint imp;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, noise_sigma);
  Eigen::Matrix4d h = pose_to_homogeneous(q);
  for (const auto& p : model.cloud.points) {
    Eigen::Vector4d v(p.x(), p.y(), p.z(), 1.0);
    Eigen::Vector3d g = (h * v).head<3>();
    g.y() += nd(rng);
    g.z() += nd(rng);
    imp.points.push_back(g);
    imp.deformation.push_back(0.005f);
  }
  return imp;
}

}  // namespace

TEST_CASE("tool model stays inside the membrane window with x = 0") {
  ToolShape tool = make_rect_tool("win", 0.016, 0.090, 0.0115);
  ObjectModel m = model_from_tool(tool);
  REQUIRE(m.cloud.points.size() > 20);
  for (const auto& p : m.cloud.points) {
    CHECK(p.x() == 0.0);
    CHECK(std::abs(p.y()) <= 0.0175 + 1e-9);
    CHECK(std::abs(p.z()) <= 0.014 + 1e-9);
    CHECK(tool.signed_distance({p.y(), p.z()}) <= 1e-9);
  }
  CHECK(m.tip.z() == doctest::Approx(tool.tip.y()));
  CHECK(m.extent == doctest::Approx(tool.max_extent()));

  // The full model is not window-limited: it reaches the tool tip.
  ObjectModel full = full_model_from_tool(tool);
  double min_z = 1e9;
  for (const auto& p : full.cloud.points) min_z = std::min(min_z, p.z());
  CHECK(min_z <= tool.tip.y() + 3e-3);
}

TEST_CASE("imprint extraction finds the contact patch of a rendered grasp") {
  ToolShape tool = make_rect_tool("imp", 0.016, 0.090, 0.0115);
  SimConfig cfg;
  cfg.sensor_noise_sigma = 0.0;
  MembraneSimulator sim(tool, cfg, 1);
  SimState s = sim.make_grasp(PoseAA::planar(0.0, 0.3, 0.0), 0.016, 0.002,
                              0.001, 0.1);
  DepthMapPair def = sim.render_depth_pair(s, false, 0);
  CameraModel left = default_camera(0, cfg.pixel_pitch, s.width / 2.0);
  CameraModel right = default_camera(1, cfg.pixel_pitch, s.width / 2.0);

  Imprint imp;
  REQUIRE(extract_imprint(def, left, right, &imp) == ObsStatus::ok);
  REQUIRE(imp.size() > 50);
  PoseAA rel = pose_compose(pose_inverse(s.grasp_pose), s.object_pose);
  Eigen::Matrix4d inv = pose_to_homogeneous(pose_inverse(rel));
  for (size_t i = 0; i < imp.size(); ++i) {
    CHECK(imp.deformation[i] >= kImprintMinDeform);
    Eigen::Vector4d v(imp.points[i].x(), imp.points[i].y(), imp.points[i].z(),
                      1.0);
    Eigen::Vector3d obj = (inv * v).head<3>();
    // Points attributed to the object lie on or just outside its footprint
    // (smoothing spreads the imprint by a couple of pixels).
    CHECK(tool.signed_distance({obj.y(), obj.z()}) <= 1.5e-3);
  }
}

TEST_CASE("empty deformation yields no imprint") {
  DepthMapPair def(kFullRows, kFullCols);
  CameraModel left = default_camera(0, 2e-4, 0.01);
  CameraModel right = default_camera(1, 2e-4, 0.01);
  Imprint imp;
  CHECK(extract_imprint(def, left, right, &imp) == ObsStatus::no_imprint);
}

TEST_CASE("icp recovers known planar offsets from noisy imprints") {
  ToolShape tool = make_trapezoid_tool("icp", 0.018, 0.006, 0.105, 0.0115);
  ObjectModel model = model_from_tool(tool);
  IcpConfig cfg;
  cfg.iterations = 40;
  cfg.max_model_points = 1000;
  cfg.max_imprint_points = 1000;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(-0.010, 0.010);
  std::uniform_real_distribution<double> ua(-15.0 * kPi / 180.0,
                                            15.0 * kPi / 180.0);
  int ok = 0, n = 20;
  for (int i = 0; i < n; ++i) {
    PoseAA q = PoseAA::planar(ut(rng), ut(rng), ua(rng));
    Imprint imp = synthetic_imprint(model, q, 0.5e-3, 100 + i);
    PoseAA est;
    if (icp_fit(imp, model, cfg, rng, &est) != ObsStatus::ok) continue;
    double terr = (est.position - q.position).norm();
    double aerr = std::abs(wrap_angle(est.planar_angle() - q.planar_angle()));
    if (terr <= 1e-3 && aerr <= 2.0 * kPi / 180.0) ++ok;
  }
  CHECK(ok >= 18);
}

TEST_CASE("contact detection thresholds the normal wrench component") {
  Wrench6 w;
  w.force = Eigen::Vector3d(0.0, 0.3, -2.0);
  CHECK(detect_contact(w, Eigen::Vector3d(0, 0, 1), 1.5));
  w.force.z() = -1.0;
  CHECK_FALSE(detect_contact(w, Eigen::Vector3d(0, 0, 1), 1.5));
}

TEST_CASE("contact manifold projection is exact and idempotent") {
  ToolShape tool = make_rect_tool("proj", 0.016, 0.090, 0.0115);
  ObjectModel model = full_model_from_tool(tool);
  Plane env;  // z = 0, +z normal
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uz(-0.02, 0.08);
  std::uniform_real_distribution<double> ua(-0.5, 0.5);
  for (int i = 0; i < 10; ++i) {
    PoseAA q = PoseAA::planar(0.01, uz(rng), ua(rng));
    PoseAA p = project_to_contact_manifold(q, model, env);
    CHECK(p.planar_angle() == doctest::Approx(q.planar_angle()));

    Eigen::Matrix4d h = pose_to_homogeneous(p);
    double min_sd = 1e9;
    for (const auto& pt : model.cloud.points) {
      Eigen::Vector4d v(pt.x(), pt.y(), pt.z(), 1.0);
      min_sd = std::min(min_sd, env.signed_distance((h * v).head<3>()));
    }
    CHECK(min_sd >= -1e-6);
    CHECK(min_sd <= 1e-6);

    PoseAA p2 = project_to_contact_manifold(p, model, env);
    CHECK((p2.position - p.position).norm() <= 1e-9);
  }
}
