// Acceptance suite: one criterion per invocation, selected by argv[1].
// argv[2] is a cache directory shared between criteria so the expensive
// corpus collection and training steps are done once.
//
// Each criterion prints a single "[PASS]"/"[FAIL]" summary line and exits 0
// on pass, 1 on fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bubbledyn/baselines.hpp"
#include "bubbledyn/dataset.hpp"
#include "bubbledyn/images.hpp"
#include "bubbledyn/models.hpp"
#include "bubbledyn/mppi.hpp"
#include "bubbledyn/observation.hpp"
#include "bubbledyn/simulator.hpp"
#include "bubbledyn/tactile.hpp"
#include "bubbledyn/tasks.hpp"
#include "bubbledyn/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace bubbledyn;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Checker {
  bool ok = true;
  std::string first_failure;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) first_failure = what;
    ok = false;
  }
};

// ---------------------------------------------------------------- criterion 1

int criterion1(const std::string&) {
  Checker c;

  {
    nn::Sequential<double> dense;
    std::mt19937_64 rng(11);
    dense.add<nn::Dense<double>>(6, 4, rng);
    nn::Tensor<double> x({3, 6});
    std::normal_distribution<double> nd;
    for (auto& v : x.d) v = nd(rng);
    double err = gradient_check(dense, x, 31);
    c.expect(err <= 1e-7, "dense gradient error " + std::to_string(err));
  }
  {
    nn::Sequential<double> conv;
    std::mt19937_64 rng(12);
    conv.add<nn::Conv2d<double>>(2, 4, 3, rng);
    nn::Tensor<double> x({2, 2, 9, 7});
    std::normal_distribution<double> nd;
    for (auto& v : x.d) v = nd(rng);
    double err = gradient_check(conv, x, 32);
    c.expect(err <= 1e-5, "conv gradient error " + std::to_string(err));
  }
  {
    MembraneDynamicsNetT<double> dyn(5);
    nn::Tensor<double> x({2, 41});
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd;
    for (auto& v : x.d) v = nd(rng);
    double err = gradient_check(dyn.net, x, 33);
    c.expect(err <= 1e-4, "dynamics net gradient error " + std::to_string(err));
  }
  {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      PoseAA q;
      q.position = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
      q.axis_angle = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
      Eigen::Matrix3d R = q.rotation();
      worst = std::max(worst, (R.transpose() * R - Eigen::Matrix3d::Identity())
                                  .cwiseAbs()
                                  .maxCoeff());
      worst = std::max(worst, std::abs(R.determinant() - 1.0));
    }
    c.expect(worst <= 1e-9, "rotation orthonormality " + std::to_string(worst));
  }
  {
    std::mt19937_64 rng(15);
    std::normal_distribution<float> nd;
    std::vector<float> data(3 * 17 * 5);
    for (auto& v : data) v = std::ldexp(nd(rng), int(rng() % 40) - 20);
    data[0] = 0.0f;
    data[1] = -0.0f;
    data[2] = std::numeric_limits<float>::denorm_min();
    std::string path = (fs::temp_directory_path() / "acc1.btns").string();
    tensor_write(path, {3, 17, 5}, data);
    TensorData back = tensor_read(path);
    bool same = back.dims == std::vector<uint32_t>{3, 17, 5} &&
                back.data.size() == data.size() &&
                std::memcmp(back.data.data(), data.data(),
                            data.size() * sizeof(float)) == 0;
    c.expect(same, "tensor roundtrip not bit-exact");
    fs::remove(path);
  }

  if (c.ok)
    std::printf("[PASS] criterion 1: gradient checks, pose orthonormality and "
                "tensor roundtrip all within tolerance\n");
  else
    std::printf("[FAIL] criterion 1: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 2

DepthMapPair random_map(int rows, int cols, uint64_t seed) {
  DepthMapPair m(rows, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.f, 1e-3f);
  for (auto& v : m.data) v = nd(rng);
  return m;
}

int criterion2(const std::string&) {
  Checker c;

  DepthMapPair raw = random_map(kRawRows, kRawCols, 21);
  DepthMapPair full = crop_raw(raw);
  c.expect(full.rows == kFullRows && full.cols == kFullCols, "crop shape");
  DepthMapPair pooled = downsample(full);
  c.expect(pooled.rows == kPoolRows && pooled.cols == kPoolCols, "pool shape");
  DepthMapPair up = upsample(pooled);
  c.expect(up.rows == kFullRows && up.cols == kFullCols, "upsample shape");

  // Linearity: both operators commute with pixelwise a*X + b*Y.
  DepthMapPair x = random_map(kFullRows, kFullCols, 22);
  DepthMapPair y = random_map(kFullRows, kFullCols, 23);
  const float a = 1.75f, b = -0.5f;
  DepthMapPair mix(kFullRows, kFullCols);
  for (size_t i = 0; i < mix.data.size(); ++i)
    mix.data[i] = a * x.data[i] + b * y.data[i];
  DepthMapPair dmix = downsample(mix), dx = downsample(x), dy = downsample(y);
  double worst = 0.0;
  for (size_t i = 0; i < dmix.data.size(); ++i)
    worst = std::max<double>(
        worst, std::abs(dmix.data[i] - (a * dx.data[i] + b * dy.data[i])));
  c.expect(worst <= 1e-6, "downsample linearity " + std::to_string(worst));

  DepthMapPair umix = upsample(dmix), ux = upsample(dx), uy = upsample(dy);
  worst = 0.0;
  for (size_t i = 0; i < umix.data.size(); ++i)
    worst = std::max<double>(
        worst, std::abs(umix.data[i] - (a * ux.data[i] + b * uy.data[i])));
  c.expect(worst <= 1e-6, "upsample linearity " + std::to_string(worst));

  // Constant preservation through the whole chain.
  DepthMapPair flat(kFullRows, kFullCols);
  for (auto& v : flat.data) v = 2.5e-3f;
  DepthMapPair dflat = downsample(flat), uflat = upsample(dflat);
  worst = 0.0;
  for (float v : dflat.data) worst = std::max<double>(worst, std::abs(v - 2.5e-3));
  for (float v : uflat.data) worst = std::max<double>(worst, std::abs(v - 2.5e-3));
  c.expect(worst <= 1e-6, "constant preservation " + std::to_string(worst));

  // Brute-force pooling oracle: plain 7x7 block means.
  worst = 0.0;
  DepthMapPair dref = downsample(x);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < kPoolRows; ++r)
      for (int cc2 = 0; cc2 < kPoolCols; ++cc2) {
        double s = 0.0;
        for (int i = 0; i < kPoolFactor; ++i)
          for (int j = 0; j < kPoolFactor; ++j)
            s += x.at(ch, r * kPoolFactor + i, cc2 * kPoolFactor + j);
        s /= double(kPoolFactor * kPoolFactor);
        worst = std::max(worst, std::abs(s - dref.at(ch, r, cc2)));
      }
  c.expect(worst <= 1e-9, "pooling oracle " + std::to_string(worst));

  if (c.ok)
    std::printf("[PASS] criterion 2: shape chain, linearity, constant "
                "preservation and pooling oracle all hold\n");
  else
    std::printf("[FAIL] criterion 2: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 3

int criterion3(const std::string&) {
  Checker c;

  ToolShape tool = make_trapezoid_tool("acc3", 0.018, 0.006, 0.105, 0.0115);
  ObjectModel model = model_from_tool(tool);
  IcpConfig cfg;
  cfg.iterations = 40;
  cfg.max_model_points = 1000;
  cfg.max_imprint_points = 1000;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(-0.010, 0.010);
  std::uniform_real_distribution<double> ua(-15.0 * kPi / 180.0,
                                            15.0 * kPi / 180.0);
  int ok = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    PoseAA q = PoseAA::planar(ut(rng), ut(rng), ua(rng));
    Eigen::Matrix4d h = pose_to_homogeneous(q);
    std::mt19937_64 nrng(100 + i);
    std::normal_distribution<double> noise(0.0, 0.5e-3);
    Imprint imp;
    for (const auto& p : model.cloud.points) {
      Eigen::Vector3d g = (h * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0)).head<3>();
      g.y() += noise(nrng);
      g.z() += noise(nrng);
      imp.points.push_back(g);
      imp.deformation.push_back(0.005f);
    }
    PoseAA est;
    if (icp_fit(imp, model, cfg, rng, &est) != ObsStatus::ok) continue;
    double terr = (est.position - q.position).norm();
    double aerr = std::abs(wrap_angle(est.planar_angle() - q.planar_angle()));
    if (terr <= 1e-3 && aerr <= 2.0 * kPi / 180.0) ++ok;
  }
  c.expect(ok >= 90, "icp recovered " + std::to_string(ok) + "/100");

  // Manifold projection: penetration-free and idempotent.
  ObjectModel fm = full_model_from_tool(tool);
  Plane env;  // z = 0, +z normal
  std::mt19937_64 prng(8);
  std::uniform_real_distribution<double> uz(-0.02, 0.08);
  std::uniform_real_distribution<double> uth(-0.5, 0.5);
  double worst_pen = 0.0, worst_idem = 0.0;
  for (int i = 0; i < 50; ++i) {
    PoseAA q = PoseAA::planar(ut(prng), uz(prng), uth(prng));
    PoseAA p = project_to_contact_manifold(q, fm, env);
    Eigen::Matrix4d h = pose_to_homogeneous(p);
    double low = 1e30;
    for (const auto& pt : fm.cloud.points)
      low = std::min(low,
                     (h * Eigen::Vector4d(pt.x(), pt.y(), pt.z(), 1.0)).z());
    worst_pen = std::max(worst_pen, -low);
    PoseAA pp = project_to_contact_manifold(p, fm, env);
    worst_idem = std::max(worst_idem, (pp.position - p.position).norm());
    worst_idem =
        std::max(worst_idem, std::abs(pp.planar_angle() - p.planar_angle()));
  }
  c.expect(worst_pen <= 1e-6, "penetration " + std::to_string(worst_pen));
  c.expect(worst_idem <= 1e-9, "idempotence " + std::to_string(worst_idem));

  if (c.ok)
    std::printf("[PASS] criterion 3: icp pose recovery %d/100 within 1mm/2deg; "
                "manifold projection penetration-free and idempotent\n", ok);
  else
    std::printf("[FAIL] criterion 3: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 4

int criterion4(const std::string&) {
  Checker c;

  ActionBox box;
  box.lo = Eigen::Vector4d(0.01, -0.02, -0.01, -0.3);
  box.hi = Eigen::Vector4d(0.04, 0.02, 0.02, 0.3);
  MppiConfig cfg;  // horizon 2, 100 samples, lambda 0.01

  {
    // Single sample: the weighted average degenerates to that sample, so the
    // action is independent of the cost function.
    MppiConfig one = cfg;
    one.samples = 1;
    std::mt19937_64 r1(5), r2(5);
    std::vector<Action4> n1, n2;
    auto cost_a = [](const std::vector<Action4>& t) { return t[0].gw; };
    auto cost_b = [](const std::vector<Action4>& t) { return 50.0 - t[1].dy; };
    Action4 a = mppi_step(cost_a, box, one, &n1, r1);
    Action4 b = mppi_step(cost_b, box, one, &n2, r2);
    c.expect(a.vec4() == b.vec4(), "single-sample collapse");
  }
  {
    // Equal costs: uniform weights regardless of the level, so two different
    // constants give the identical update.
    std::mt19937_64 r1(6), r2(6);
    std::vector<Action4> n1, n2;
    Action4 a = mppi_step([](const std::vector<Action4>&) { return 3.0; }, box,
                          cfg, &n1, r1);
    Action4 b = mppi_step([](const std::vector<Action4>&) { return 4e6; }, box,
                          cfg, &n2, r2);
    c.expect(a.vec4() == b.vec4(), "equal-cost averaging");
  }
  {
    // Adding a constant to every trajectory cost leaves the softmax weights
    // unchanged up to rounding.
    auto base = [](const std::vector<Action4>& t) {
      double s = 0.0;
      for (const auto& a : t) s += a.dy * a.dy + 0.1 * a.dphi * a.dphi;
      return s;
    };
    std::mt19937_64 r1(7), r2(7);
    std::vector<Action4> n1, n2;
    Action4 a = mppi_step(base, box, cfg, &n1, r1);
    Action4 b = mppi_step(
        [&](const std::vector<Action4>& t) { return base(t) + 1000.0; }, box,
        cfg, &n2, r2);
    c.expect((a.vec4() - b.vec4()).cwiseAbs().maxCoeff() <= 1e-9,
             "cost-offset invariance");
  }
  {
    // 1-d damped point x' = x + 0.5 (0 - x) + a, |a| <= 0.2, goal 1. The
    // reachable steady state is x = 0.4, so the optimal stage cost is 0.36.
    ActionBox toy;
    toy.lo = Eigen::Vector4d(-0.2, 0.0, 0.0, 0.0);
    toy.hi = Eigen::Vector4d(0.2, 0.0, 0.0, 0.0);
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
      Action4 a = mppi_step(cost, toy, cfg, &nominal, rng);
      x = step(x, a.gw);
    }
    double final_cost = (x - 1.0) * (x - 1.0);
    c.expect(final_cost >= 0.36 * 0.95 && final_cost <= 0.36 * 1.05,
             "toy final cost " + std::to_string(final_cost));
  }

  if (c.ok)
    std::printf("[PASS] criterion 4: mppi collapse/averaging/offset "
                "invariance hold and the 1-d toy lands within 5%% of the "
                "analytic optimum\n");
  else
    std::printf("[FAIL] criterion 4: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

// ------------------------------------------------- shared corpus + training

TrainConfig acceptance_train_config() {
  TrainConfig tc;
  tc.seed = 7;
  tc.epochs = 15;
  tc.patience = 15;
  return tc;
}

Dataset ensure_pivot_data(const std::string& cache) {
  std::string dir = cache + "/pivot_data";
  if (fs::exists(dir + "/manifest.json")) return load_dataset(dir);
  auto tools = pivoting_tool_set();
  tools.resize(5);
  CollectConfig cc;
  cc.per_tool = 800;
  cc.seed = 7;
  Dataset ds = collect_pivoting_data(tools, SimConfig{}, cc);
  fs::create_directories(dir);
  save_dataset(ds, dir);
  return ds;
}

struct PivotModels {
  TactileAutoencoder ae{7};
  ObjectEncoder enc{7};
  MembraneDynamicsNet dyn{7};
  LinearDynamics lin{7};
  ObjectPoseDynamicsNet objpose{7};
};

// Trains (or reloads) everything criterion 5 and 6 need on the pivoting
// corpus. The autoencoder sees a subsampled map set; at acceptance scale the
// full 8000-map corpus buys no extra fidelity for its cost.
void ensure_pivot_models(const std::string& cache, const Dataset& ds,
                         PivotModels* m) {
  std::string ck = cache + "/pivot_ckpt";
  TrainConfig tc = acceptance_train_config();
  if (!fs::exists(ck + "/ae/meta.json")) {
    std::vector<DepthMapPair> maps;
    for (size_t i = 0; i < ds.transitions.size(); i += 4) {
      maps.push_back(ds.transitions[i].s.tactile);
      maps.push_back(ds.transitions[i].s_next.tactile);
    }
    TrainReport r = train_autoencoder(maps, tc, &m->ae);
    save_autoencoder(m->ae, ck + "/ae", tc, r);
  } else {
    load_autoencoder(m->ae, ck + "/ae");
  }
  DynTrainData dd;
  dd.data = &ds;
  auto tools = pivoting_tool_set();
  for (const auto& name : ds.objects)
    for (const auto& t : tools)
      if (t.name == name) dd.object_models.push_back(full_model_from_tool(t));

  if (!fs::exists(ck + "/objenc/head_0_w.btns")) {
    pretrain_object_encoder(tc, &m->enc);
    save_object_encoder(m->enc, ck + "/objenc");
  } else {
    load_object_encoder(m->enc, ck + "/objenc");
  }
  if (!fs::exists(ck + "/dyn/meta.json")) {
    TrainReport r = train_dynamics(dd, tc, &m->ae, &m->enc, &m->dyn);
    save_dynamics_net(m->dyn, ck + "/dyn", "membrane", tc, r);
    save_object_encoder(m->enc, ck + "/objenc");
  } else {
    load_dynamics_net(m->dyn, ck + "/dyn");
  }
  if (!fs::exists(ck + "/linear/dyn_0_w.btns")) {
    train_linear_dynamics(dd, tc, &m->ae, &m->enc, &m->lin);
    save_sequential(m->lin.net, ck + "/linear", "dyn");
  } else {
    load_sequential(m->lin.net, ck + "/linear", "dyn");
  }
  if (!fs::exists(ck + "/objpose/dyn_0_w.btns")) {
    train_objpose_dynamics(dd, tc, &m->enc, &m->objpose);
    save_sequential(m->objpose.net, ck + "/objpose", "dyn");
  } else {
    load_sequential(m->objpose.net, ck + "/objpose", "dyn");
  }
}

Dataset ensure_draw_data(const std::string& cache) {
  std::string dir = cache + "/draw_data";
  if (fs::exists(dir + "/manifest.json")) return load_dataset(dir);
  auto tools = drawing_tool_set();
  tools.resize(5);
  CollectConfig cc;
  cc.per_tool = 400;
  cc.seed = 9;
  Dataset ds = collect_drawing_data(tools, SimConfig{}, cc);
  fs::create_directories(dir);
  save_dataset(ds, dir);
  return ds;
}

void ensure_draw_models(const std::string& cache, const Dataset& ds,
                        PivotModels* m) {
  std::string ck = cache + "/draw_ckpt";
  TrainConfig tc = acceptance_train_config();
  if (!fs::exists(ck + "/ae/meta.json")) {
    std::vector<DepthMapPair> maps;
    for (size_t i = 0; i < ds.transitions.size(); i += 2) {
      maps.push_back(ds.transitions[i].s.tactile);
      maps.push_back(ds.transitions[i].s_next.tactile);
    }
    TrainReport r = train_autoencoder(maps, tc, &m->ae);
    save_autoencoder(m->ae, ck + "/ae", tc, r);
  } else {
    load_autoencoder(m->ae, ck + "/ae");
  }
  DynTrainData dd;
  dd.data = &ds;
  auto tools = drawing_tool_set();
  for (const auto& name : ds.objects)
    for (const auto& t : tools)
      if (t.name == name) dd.object_models.push_back(full_model_from_tool(t));
  if (!fs::exists(ck + "/objenc/head_0_w.btns")) {
    pretrain_object_encoder(tc, &m->enc);
    save_object_encoder(m->enc, ck + "/objenc");
  } else {
    load_object_encoder(m->enc, ck + "/objenc");
  }
  if (!fs::exists(ck + "/dyn/meta.json")) {
    TrainReport r = train_dynamics(dd, tc, &m->ae, &m->enc, &m->dyn);
    save_dynamics_net(m->dyn, ck + "/dyn", "membrane", tc, r);
    save_object_encoder(m->enc, ck + "/objenc");
  } else {
    load_dynamics_net(m->dyn, ck + "/dyn");
  }
}

// ---------------------------------------------------------------- criterion 5

int criterion5(const std::string& cache) {
  Dataset ds = ensure_pivot_data(cache);
  PivotModels m;
  ensure_pivot_models(cache, ds, &m);

  TrainConfig tc = acceptance_train_config();
  TactileMseEval ev;
  {
    DynTrainData dd;
    dd.data = &ds;
    auto tools = pivoting_tool_set();
    for (const auto& name : ds.objects)
      for (const auto& t : tools)
        if (t.name == name) dd.object_models.push_back(full_model_from_tool(t));
    ev = eval_dynamics_tactile_mse(dd, tc, m.ae, m.enc, m.dyn);
  }

  bool ok = ev.model_mse <= 0.8 * ev.identity_mse;
  if (ok)
    std::printf("[PASS] criterion 5: membrane one-step tactile mse %.3e beats "
                "the fixed-membrane identity %.3e by %.1f%% (gate 20%%)\n",
                ev.model_mse, ev.identity_mse,
                100.0 * (1.0 - ev.model_mse / ev.identity_mse));
  else
    std::printf("[FAIL] criterion 5: membrane mse %.3e vs identity %.3e "
                "(improvement %.1f%%, need >= 20%%)\n",
                ev.model_mse, ev.identity_mse,
                100.0 * (1.0 - ev.model_mse / ev.identity_mse));
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 6

EvalContext base_context(const std::string& task, const std::string& kind,
                         PivotModels* m) {
  EvalContext ctx;
  ctx.task = task;
  ctx.model_kind = kind;
  auto all = task == "pivoting" ? pivoting_tool_set() : drawing_tool_set();
  ctx.tools = {all[0], all[1], all[2], all[5]};  // 3 train + 1 held-out
  ctx.protocol.trials = 3;  // x4 tools = 12 trials per model
  ctx.mppi.samples = 24;
  ctx.icp.iterations = 8;
  ctx.icp.max_model_points = 120;
  ctx.icp.max_imprint_points = 200;
  ctx.seed = 77;
  if (kind == "membrane") {
    ctx.ae = &m->ae;
    ctx.enc = &m->enc;
    ctx.dyn = &m->dyn;
  } else if (kind == "linear") {
    ctx.ae = &m->ae;
    ctx.enc = &m->enc;
    ctx.lin = &m->lin;
  } else if (kind == "objpose") {
    ctx.enc = &m->enc;
    ctx.objpose = &m->objpose;
  }
  return ctx;
}

int criterion6(const std::string& cache) {
  Checker c;

  Dataset pds = ensure_pivot_data(cache);
  PivotModels pm;
  ensure_pivot_models(cache, pds, &pm);

  auto mean_of = [](const EvalResults& r) { return r.mean_score(); };
  auto dump_rows = [](const EvalResults& r) {
    if (!std::getenv("BUBBLEDYN_ACC_VERBOSE")) return;
    for (const TrialRow& row : r.rows)
      std::printf("    %-10s trial %d score %.3f steps %2d %s\n",
                  row.tool.c_str(), row.trial, row.score, row.steps,
                  row.termination.c_str());
  };

  double piv_membrane = 0, piv_linear = 0, piv_objpose = 0, piv_random = 0;
  for (const std::string kind : {"membrane", "linear", "objpose", "random"}) {
    EvalContext ctx = base_context("pivoting", kind, &pm);
    EvalResults r = run_evaluation(ctx);
    double mean = mean_of(r);
    if (kind == "membrane") piv_membrane = mean;
    if (kind == "linear") piv_linear = mean;
    if (kind == "objpose") piv_objpose = mean;
    if (kind == "random") piv_random = mean;
    std::printf("  pivoting/%s: mean |angle error| %.2f deg over %zu trials\n",
                kind.c_str(), mean, r.rows.size());
    dump_rows(r);
  }
  c.expect(piv_membrane < piv_linear, "pivoting: membrane !< linear");
  c.expect(piv_membrane < piv_objpose, "pivoting: membrane !< objpose");
  c.expect(piv_membrane < piv_random, "pivoting: membrane !< random");

  Dataset dds = ensure_draw_data(cache);
  PivotModels dm;
  ensure_draw_models(cache, dds, &dm);

  double dr_membrane = 0, dr_fixed = 0, dr_random = 0;
  for (const std::string kind : {"membrane", "fixed", "random"}) {
    EvalContext ctx = base_context("drawing", kind, &dm);
    ctx.protocol.max_draw_actions = 40;
    EvalResults r = run_evaluation(ctx);
    double mean = mean_of(r);
    if (kind == "membrane") dr_membrane = mean;
    if (kind == "fixed") dr_fixed = mean;
    if (kind == "random") dr_random = mean;
    std::printf("  drawing/%s: mean score %.3f over %zu trials\n", kind.c_str(),
                mean, r.rows.size());
    dump_rows(r);
  }
  c.expect(dr_membrane > dr_fixed, "drawing: membrane !> fixed");
  c.expect(dr_fixed > dr_random, "drawing: fixed !> random");

  if (c.ok)
    std::printf("[PASS] criterion 6: orderings hold (pivoting %.2f < %.2f / "
                "%.2f / %.2f deg; drawing %.3f > %.3f > %.3f)\n",
                piv_membrane, piv_linear, piv_objpose, piv_random, dr_membrane,
                dr_fixed, dr_random);
  else
    std::printf("[FAIL] criterion 6: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 7

int criterion7(const std::string&) {
  Checker c;

  std::mt19937_64 rng(17);
  std::bernoulli_distribution bit(0.25);
  for (int trial = 0; trial < 100 && c.ok; ++trial) {
    BitMask meas(48, 64), goal(48, 64);
    for (auto& b : meas.bits) b = bit(rng);
    for (auto& b : goal.bits) b = bit(rng);
    size_t both = 0, m = 0, g = 0;
    for (size_t i = 0; i < meas.bits.size(); ++i) {
      both += meas.bits[i] && goal.bits[i];
      m += meas.bits[i];
      g += goal.bits[i];
    }
    DrawingScore s = drawing_score(meas, goal);
    double want_on = m ? double(both) / double(m) : 0.0;
    double want_cov = g ? double(both) / double(g) : 0.0;
    c.expect(s.on_line == want_on && s.coverage == want_cov,
             "drawing score mismatch at trial " + std::to_string(trial));
  }
  {
    BitMask empty(8, 8), goal(8, 8);
    goal.at(1, 1) = 1;
    DrawingScore s = drawing_score(empty, goal);
    c.expect(s.on_line == 0.0 && s.coverage == 0.0, "empty mask score");
  }

  struct Row {
    double a, g, want;
  };
  const Row rows[] = {{0, 0, 0},        {30, 50, 20},   {-170, 170, 20},
                      {179, -179, 2},   {350, -10, 0},  {90, -90, 180},
                      {0, 180, 180},    {720, 0, 0},    {-360, 360, 0},
                      {10, -350, 0},    {181, -181, 2}, {270, -90, 0},
                      {45.5, -45.5, 91}};
  for (const auto& r : rows)
    c.expect(std::abs(pivoting_score(r.a, r.g) - r.want) <= 1e-12,
             "pivoting wrap " + std::to_string(r.a) + " vs " +
                 std::to_string(r.g));

  if (c.ok)
    std::printf("[PASS] criterion 7: drawing score matches brute-force pixel "
                "counting on 100 mask pairs; pivoting wrap arithmetic exact\n");
  else
    std::printf("[FAIL] criterion 7: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int criterion8(const std::string& cache) {
  const std::string cli = BUBBLEDYN_CLI_PATH;
  Checker c;

  auto pipeline = [&](const std::string& dir) -> bool {
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto run = [&](const std::string& args) {
      std::string cmd = "BUBBLEDYN_SEED=1234 " + cli + " " + args + " > " +
                        dir + "/log.txt 2>&1";
      return std::system(cmd.c_str()) == 0;
    };
    return run("collect --task pivoting --tools 2 --per-tool 40 --out " + dir +
               "/data") &&
           run("train --task pivoting --data " + dir + "/data --out " + dir +
               "/ckpt --model all --epochs 3") &&
           run("eval --task pivoting --model membrane --checkpoints " + dir +
               "/ckpt --tools 2 --out " + dir + "/eval_m --trials 2") &&
           run("eval --task pivoting --model random --out " + dir +
               "/eval_r --trials 2 --tools 2");
  };

  std::string d1 = cache + "/e2e_run1", d2 = cache + "/e2e_run2";
  bool ran = pipeline(d1) && pipeline(d2);
  c.expect(ran, "cli pipeline returned nonzero");
  if (ran) {
    for (const std::string leaf : {"/eval_m/results.csv", "/eval_r/results.csv"}) {
      std::string a = slurp(d1 + leaf), b = slurp(d2 + leaf);
      c.expect(!a.empty() && a == b, "results differ: " + leaf);
    }
  }

  if (c.ok)
    std::printf("[PASS] criterion 8: collect->train->eval reproduces "
                "byte-identical results CSVs under BUBBLEDYN_SEED=1234, "
                "twice\n");
  else
    std::printf("[FAIL] criterion 8: %s\n", c.first_failure.c_str());
  return c.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..8> <cache dir>\n");
    return 2;
  }
  int which = std::atoi(argv[1]);
  std::string cache = argv[2];
  fs::create_directories(cache);

  auto t0 = std::chrono::steady_clock::now();
  int rc = 2;
  try {
    switch (which) {
      case 1: rc = criterion1(cache); break;
      case 2: rc = criterion2(cache); break;
      case 3: rc = criterion3(cache); break;
      case 4: rc = criterion4(cache); break;
      case 5: rc = criterion5(cache); break;
      case 6: rc = criterion6(cache); break;
      case 7: rc = criterion7(cache); break;
      case 8: rc = criterion8(cache); break;
      default:
        std::fprintf(stderr, "unknown criterion %d\n", which);
        return 2;
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] criterion %d: exception: %s\n", which, e.what());
    return 1;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0).count();
  std::printf("criterion %d runtime: %.1f s\n", which, secs);
  return rc;
}
