#include <random>

#include "bubbledyn/mppi.hpp"
#include "doctest.h"

using namespace bubbledyn;

namespace {

ActionBox unit_box() {
  ActionBox b;
  b.lo = Eigen::Vector4d(-1.0, -1.0, -1.0, -1.0);
  b.hi = Eigen::Vector4d(1.0, 1.0, 1.0, 1.0);
  return b;
}

Eigen::Vector4d to_vec(const Action4& a) {
  return Eigen::Vector4d(a.gw, a.dy, a.dz, a.dphi);
}

}  // namespace

TEST_CASE("a single sample is returned regardless of its cost") {
  MppiConfig cfg;
  cfg.samples = 1;
  cfg.horizon = 2;
  auto run = [&](double scale) {
    std::mt19937_64 rng(7);
    std::vector<Action4> nominal;
    auto cost = [&](const std::vector<Action4>& traj) {
      return scale * to_vec(traj[0]).squaredNorm();
    };
    return to_vec(mppi_step(cost, unit_box(), cfg, &nominal, rng));
  };
  // With one sample the softmax weight is 1, so the cost cannot matter.
  CHECK((run(1.0) - run(1e6)).norm() == 0.0);
}

TEST_CASE("equal costs average the samples independently of lambda and level") {
  MppiConfig cfg;
  auto run = [&](double level, double lambda) {
    MppiConfig c = cfg;
    c.lambda = lambda;
    std::mt19937_64 rng(11);
    std::vector<Action4> nominal;
    auto cost = [&](const std::vector<Action4>&) { return level; };
    return to_vec(mppi_step(cost, unit_box(), c, &nominal, rng));
  };
  Eigen::Vector4d a = run(0.0, 0.01);
  CHECK((a - run(5.0, 0.01)).norm() == 0.0);
  CHECK((a - run(0.0, 10.0)).norm() == 0.0);
  // A centered nominal with symmetric noise keeps the average near the mean.
  CHECK(a.norm() <= 0.15);
}

TEST_CASE("adding a constant to the cost does not change the action") {
  MppiConfig cfg;
  auto run = [&](double offset) {
    std::mt19937_64 rng(13);
    std::vector<Action4> nominal;
    auto cost = [&](const std::vector<Action4>& traj) {
      double s = offset;
      for (const auto& a : traj) s += to_vec(a).squaredNorm();
      return s;
    };
    return to_vec(mppi_step(cost, unit_box(), cfg, &nominal, rng));
  };
  // Identical samples; only the softmax weights see the offset, and those
  // agree up to rounding in (cost - min) / lambda.
  CHECK((run(0.0) - run(1234.5)).norm() <= 1e-9);
}

TEST_CASE("nominal sequence keeps the horizon length and warm-starts") {
  MppiConfig cfg;
  std::mt19937_64 rng(17);
  std::vector<Action4> nominal;
  auto cost = [&](const std::vector<Action4>& traj) {
    return to_vec(traj[0]).squaredNorm();
  };
  mppi_step(cost, unit_box(), cfg, &nominal, rng);
  REQUIRE(int(nominal.size()) == cfg.horizon);
  // Shift-left refills the tail with the box mean (zero for the unit box).
  CHECK(to_vec(nominal.back()).norm() == 0.0);
  mppi_step(cost, unit_box(), cfg, &nominal, rng);
  CHECK(int(nominal.size()) == cfg.horizon);
}

TEST_CASE("sampled actions respect the box") {
  ActionBox box;
  box.lo = Eigen::Vector4d(0.2, -0.1, 0.0, -0.05);
  box.hi = Eigen::Vector4d(0.4, 0.1, 0.02, 0.05);
  MppiConfig cfg;
  std::mt19937_64 rng(19);
  std::vector<Action4> nominal;
  auto cost = [&](const std::vector<Action4>& traj) {
    for (const auto& a : traj) REQUIRE(box.contains(to_vec(a)));
    return 0.0;
  };
  Action4 a = mppi_step(cost, box, cfg, &nominal, rng);
  CHECK(box.contains(to_vec(a)));
}

TEST_CASE("mppi steers a damped 1-d point to its constrained optimum") {
  // x' = x + 0.5 (0 - x) + a with |a| <= 0.2 and goal 1: the reachable steady
  // state is x = 0.4, so the best attainable stage cost is 0.36.
  ActionBox box;
  box.lo = Eigen::Vector4d(-0.2, 0.0, 0.0, 0.0);
  box.hi = Eigen::Vector4d(0.2, 0.0, 0.0, 0.0);
  MppiConfig cfg;  // horizon 2, 100 samples, lambda 0.01
  std::mt19937_64 rng(23);
  std::vector<Action4> nominal;
  double x = 0.0;
  auto step = [](double xi, double a) { return xi + 0.5 * (0.0 - xi) + a; };
  for (int t = 0; t < 50; ++t) {
    auto cost = [&](const std::vector<Action4>& traj) {
      double xi = x, s = 0.0;
      for (const auto& a : traj) {
        xi = step(xi, a.gw);
        s += (xi - 1.0) * (xi - 1.0);
      }
      return s;
    };
    Action4 a = mppi_step(cost, box, cfg, &nominal, rng);
    x = step(x, a.gw);
  }
  double final_cost = (x - 1.0) * (x - 1.0);
  CHECK(final_cost <= 0.36 * 1.05);
  CHECK(final_cost >= 0.36 * 0.95);
}

TEST_CASE("object pose cost is the mean squared point displacement") {
  std::vector<Eigen::Vector3d> pts = {{0, 0.01, 0.0}, {0, -0.01, 0.02}};
  PoseAA q = PoseAA::planar(0.001, 0.002, 0.0);
  PoseAA g = PoseAA::planar(0.0, 0.0, 0.0);
  double expect = 0.0;
  for (const auto& p : pts)
    expect += (Eigen::Vector3d(0, p.y() + 0.001, p.z() + 0.002) - p).squaredNorm();
  expect /= pts.size();
  CHECK(object_pose_cost(q, g, pts) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(object_pose_cost(g, g, pts) == doctest::Approx(0.0));
}
