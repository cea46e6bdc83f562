#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bubbledyn/baselines.hpp"
#include "bubbledyn/dataset.hpp"
#include "bubbledyn/images.hpp"
#include "bubbledyn/models.hpp"
#include "bubbledyn/simulator.hpp"
#include "bubbledyn/tasks.hpp"

namespace fs = std::filesystem;
using namespace bubbledyn;

namespace {

uint64_t resolve_seed(uint64_t cli_seed) {
  // BUBBLEDYN_SEED wins over the flag so scripted runs can pin determinism.
  if (const char* env = std::getenv("BUBBLEDYN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::runtime_error("BUBBLEDYN_SEED is not an integer: " +
                               std::string(env));
    }
  }
  return cli_seed;
}

std::vector<ToolShape> task_tools(const std::string& task) {
  return task == "drawing" ? drawing_tool_set() : pivoting_tool_set();
}

// --tools accepts: an integer N (first N tools), "train" (first 5), "heldout"
// (last 3), "eval" (3 train + 1 held-out), "all", or a comma list of indices.
std::vector<ToolShape> select_tools(const std::string& task,
                                    const std::string& spec) {
  auto all = task_tools(task);
  std::vector<size_t> idx;
  if (spec == "train") {
    idx = {0, 1, 2, 3, 4};
  } else if (spec == "heldout") {
    idx = {5, 6, 7};
  } else if (spec == "eval") {
    idx = {0, 1, 2, 5};
  } else if (spec == "all") {
    for (size_t i = 0; i < all.size(); ++i) idx.push_back(i);
  } else if (spec.find(',') != std::string::npos) {
    size_t pos = 0;
    while (pos < spec.size()) {
      size_t comma = spec.find(',', pos);
      if (comma == std::string::npos) comma = spec.size();
      idx.push_back(std::stoul(spec.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  } else {
    size_t n = std::stoul(spec);
    for (size_t i = 0; i < std::min(n, all.size()); ++i) idx.push_back(i);
  }
  std::vector<ToolShape> out;
  for (size_t i : idx) {
    if (i >= all.size())
      throw std::runtime_error("tool index out of range: " + std::to_string(i));
    out.push_back(all[i]);
  }
  return out;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  if (!j.contains("sim")) return c;
  const auto& s = j["sim"];
  if (s.contains("membrane_k")) c.membrane_k = s["membrane_k"];
  if (s.contains("mu")) c.mu = s["mu"];
  if (s.contains("mu_env")) c.mu_env = s["mu_env"];
  if (s.contains("sensor_noise_sigma")) c.sensor_noise_sigma = s["sensor_noise_sigma"];
  if (s.contains("drop_force")) c.drop_force = s["drop_force"];
  return c;
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path);
  return nlohmann::json::parse(f);
}

std::vector<ObjectModel> object_models_for(const Dataset& ds,
                                           const std::string& task) {
  auto all = task_tools(task);
  std::vector<ObjectModel> models;
  for (const auto& name : ds.objects) {
    bool found = false;
    for (const auto& t : all)
      if (t.name == name) {
        models.push_back(full_model_from_tool(t));
        found = true;
        break;
      }
    if (!found) throw std::runtime_error("unknown tool in dataset: " + name);
  }
  return models;
}

int cmd_collect(const std::string& task, const std::string& tools_spec,
                int per_tool, const std::string& out, uint64_t seed,
                const nlohmann::json& config) {
  CollectConfig cc;
  cc.per_tool = per_tool;
  cc.seed = seed;
  if (config.contains("collect")) {
    const auto& c = config["collect"];
    if (c.contains("epsilon")) cc.epsilon = c["epsilon"];
    if (c.contains("episode_steps")) cc.episode_steps = c["episode_steps"];
    if (c.contains("alpha_impedance")) cc.alpha_impedance = c["alpha_impedance"];
  }
  SimConfig sc = sim_config_from_json(config);
  auto tools = select_tools(task, tools_spec);
  Dataset ds = task == "drawing" ? collect_drawing_data(tools, sc, cc)
                                 : collect_pivoting_data(tools, sc, cc);
  save_dataset(ds, out);
  std::cout << "collected " << ds.size() << " transitions from "
            << tools.size() << " tools -> " << out << "\n";
  return 0;
}

int cmd_train(const std::string& task, const std::string& data,
              const std::string& out, const std::string& which, int epochs,
              uint64_t seed) {
  Dataset ds = load_dataset(data);
  if (ds.task != task)
    throw std::runtime_error("dataset task is " + ds.task + ", expected " + task);
  TrainConfig tc;
  tc.seed = seed;
  tc.epochs = epochs;
  fs::create_directories(out);

  TactileAutoencoder ae(seed);
  ObjectEncoder enc(seed);
  bool want_ae = which == "all" || which == "membrane" || which == "linear";
  if (want_ae) {
    std::string ae_dir = out + "/ae";
    if (fs::exists(ae_dir + "/meta.json")) {
      load_autoencoder(ae, ae_dir);
      std::cout << "ae: reusing " << ae_dir << "\n";
    } else {
      std::vector<DepthMapPair> maps;
      for (const auto& t : ds.transitions) {
        maps.push_back(t.s.tactile);
        maps.push_back(t.s_next.tactile);
      }
      TrainReport r = train_autoencoder(maps, tc, &ae);
      save_autoencoder(ae, ae_dir, tc, r);
      std::cout << "ae: best val " << r.best_val_loss << " @ epoch "
                << r.best_epoch << "\n";
    }
  }
  {
    std::string enc_dir = out + "/objenc";
    if (fs::exists(enc_dir + "/head_0_w.btns")) {
      load_object_encoder(enc, enc_dir);
      std::cout << "objenc: reusing " << enc_dir << "\n";
    } else {
      TrainReport r = pretrain_object_encoder(tc, &enc);
      save_object_encoder(enc, enc_dir);
      std::cout << "objenc: best val " << r.best_val_loss << "\n";
    }
  }

  DynTrainData dd;
  dd.data = &ds;
  dd.object_models = object_models_for(ds, task);

  if (which == "all" || which == "membrane") {
    MembraneDynamicsNet dyn(seed);
    TrainReport r = train_dynamics(dd, tc, &ae, &enc, &dyn);
    save_dynamics_net(dyn, out + "/dyn", "membrane", tc, r);
    save_object_encoder(enc, out + "/objenc");  // head trained jointly
    std::cout << "membrane: best val " << r.best_val_loss << " @ epoch "
              << r.best_epoch << "\n";
  }
  if (which == "all" || which == "linear") {
    LinearDynamics lin(seed);
    TrainReport r = train_linear_dynamics(dd, tc, &ae, &enc, &lin);
    save_sequential(lin.net, out + "/linear", "dyn");
    std::cout << "linear: best val " << r.best_val_loss << "\n";
  }
  if (which == "all" || which == "objpose") {
    ObjectPoseDynamicsNet op(seed);
    TrainReport r = train_objpose_dynamics(dd, tc, &enc, &op);
    save_sequential(op.net, out + "/objpose", "dyn");
    std::cout << "objpose: best val " << r.best_val_loss << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& task, const std::string& model,
             const std::string& ckpt, const std::string& tools_spec,
             const std::string& out, int trials, uint64_t seed,
             bool wide_goals, double line_length,
             const nlohmann::json& config) {
  if (!model_valid_for_task(model, task))
    throw std::runtime_error("model " + model + " is not valid for task " + task);

  EvalContext ctx;
  ctx.task = task;
  ctx.model_kind = model;
  ctx.tools = select_tools(task, tools_spec);
  ctx.sim_cfg = sim_config_from_json(config);
  ctx.protocol.trials = trials;
  ctx.protocol.goal_range_deg = wide_goals ? 150.0 : 90.0;
  ctx.protocol.line_length = line_length;
  ctx.seed = seed;

  TactileAutoencoder ae(seed);
  ObjectEncoder enc(seed);
  MembraneDynamicsNet dyn(seed);
  LinearDynamics lin(seed);
  ObjectPoseDynamicsNet op(seed);
  bool needs_nets = model == "membrane" || model == "linear" || model == "objpose";
  if (needs_nets) {
    if (ckpt.empty()) throw std::runtime_error("--checkpoints required for " + model);
    load_object_encoder(enc, ckpt + "/objenc");
    ctx.enc = &enc;
    if (model == "membrane") {
      load_autoencoder(ae, ckpt + "/ae");
      load_dynamics_net(dyn, ckpt + "/dyn");
      ctx.ae = &ae;
      ctx.dyn = &dyn;
    } else if (model == "linear") {
      load_autoencoder(ae, ckpt + "/ae");
      load_sequential(lin.net, ckpt + "/linear", "dyn");
      ctx.ae = &ae;
      ctx.lin = &lin;
    } else {
      load_sequential(op.net, ckpt + "/objpose", "dyn");
      ctx.objpose = &op;
    }
  }

  EvalResults res = run_evaluation(ctx);
  fs::create_directories(out);
  save_results_csv(res, out + "/results.csv");
  save_results_json(res, out + "/summary.json");
  std::cout << task << "/" << model << ": mean " << res.mean_score() << " std "
            << res.std_score() << " over " << res.rows.size() << " trials\n";
  return 0;
}

int cmd_score_drawing(const std::string& meas_path, const std::string& goal_path) {
  BitMask meas = read_pbm(meas_path);
  BitMask goal = read_pbm(goal_path);
  DrawingScore s = drawing_score(meas, goal);
  std::cout << "{\"on_line\": " << s.on_line << ", \"coverage\": " << s.coverage
            << "}\n";
  return 0;
}

int cmd_render(const std::string& scenario_path, const std::string& out,
               uint64_t seed) {
  Scenario sc = load_scenario(scenario_path);
  MembraneSimulator sim(sc.tool, sc.cfg, seed);
  DepthMapPair m = sim.render_depth_pair(sc.initial, true, seed);
  write_depth_pgm(out, m);
  std::cout << "wrote " << out << "_left.pgm / _right.pgm\n";
  return 0;
}

int cmd_sim_rollout(const std::string& scenario_path, const std::string& task,
                    int steps, const std::string& out, uint64_t seed) {
  Scenario sc = load_scenario(scenario_path);
  MembraneSimulator sim(sc.tool, sc.cfg, seed);
  std::mt19937_64 rng(seed);
  SimState st = sc.initial;
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << "step,grasp_y,grasp_z,grasp_theta,obj_y,obj_z,obj_theta,rel_angle,width,"
       "in_contact,dropped\n";
  auto emit = [&](int step) {
    f << step << ',' << st.grasp_pose.position.y() << ','
      << st.grasp_pose.position.z() << ',' << st.grasp_pose.planar_angle() << ','
      << st.object_pose.position.y() << ',' << st.object_pose.position.z() << ','
      << st.object_pose.planar_angle() << ','
      << MembraneSimulator::relative_angle(st) << ',' << st.width << ','
      << st.in_contact << ',' << st.dropped << '\n';
  };
  emit(0);
  for (int i = 1; i <= steps; ++i) {
    double d_env = st.grasp_pose.position.z() - sc.cfg.env_plane.point.z();
    ActionBox box = task == "drawing" ? drawing_action_box()
                                      : pivoting_action_box(d_env);
    double gw_hi =
        std::min(box.hi[0], 2.0 * (sc.tool.extrusion_half_width - 1e-3));
    Action4 a = pseudo_random_policy(
        box, [&](const Action4& c) { return c.gw <= gw_hi; }, rng);
    st = sim.sim_step(st, a);
    emit(i);
    if (st.dropped) break;
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bubbledyn: membrane-grasp dynamics, models, and control"};
  app.require_subcommand(1);

  std::string task = "pivoting", tools_spec = "train", out = "out";
  std::string data, which = "all", model = "membrane", ckpt, config_path;
  std::string meas_path, goal_path, scenario_path;
  int per_tool = 800, epochs = 60, trials = 10, steps = 10;
  uint64_t seed = 0;
  bool wide_goals = false;
  double line_length = 0.3;

  auto* collect = app.add_subcommand("collect", "Collect a transition dataset");
  collect->add_option("--task", task)->check(CLI::IsMember({"drawing", "pivoting"}));
  collect->add_option("--tools", tools_spec);
  collect->add_option("--per-tool", per_tool);
  collect->add_option("--out", out)->required();
  collect->add_option("--seed", seed);
  collect->add_option("--config", config_path);

  auto* train = app.add_subcommand("train", "Train models on a dataset");
  train->add_option("--task", task)->check(CLI::IsMember({"drawing", "pivoting"}));
  train->add_option("--data", data)->required();
  train->add_option("--out", out)->required();
  train->add_option("--model", which)
      ->check(CLI::IsMember({"all", "membrane", "linear", "objpose"}));
  train->add_option("--epochs", epochs);
  train->add_option("--seed", seed);

  auto* eval = app.add_subcommand("eval", "Run task evaluation trials");
  eval->add_option("--task", task)->check(CLI::IsMember({"drawing", "pivoting"}));
  eval->add_option("--model", model)
      ->check(CLI::IsMember(
          {"membrane", "linear", "objpose", "fixed", "jacobian", "random"}));
  eval->add_option("--checkpoints", ckpt);
  eval->add_option("--tools", tools_spec);
  eval->add_option("--out", out)->required();
  eval->add_option("--trials", trials);
  eval->add_option("--seed", seed);
  eval->add_flag("--wide-goals", wide_goals);
  eval->add_option("--line-length", line_length);
  eval->add_option("--config", config_path);

  auto* score = app.add_subcommand("score-drawing", "Score a drawn mask");
  score->add_option("--meas", meas_path)->required();
  score->add_option("--goal", goal_path)->required();

  auto* render = app.add_subcommand("render", "Render a scenario's depth maps");
  render->add_option("--scenario", scenario_path)->required();
  render->add_option("--out", out)->required();
  render->add_option("--seed", seed);

  auto* rollout = app.add_subcommand("sim-rollout", "Random rollout to CSV");
  rollout->add_option("--scenario", scenario_path)->required();
  rollout->add_option("--task", task)->check(CLI::IsMember({"drawing", "pivoting"}));
  rollout->add_option("--steps", steps);
  rollout->add_option("--out", out)->required();
  rollout->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    seed = resolve_seed(seed);
    nlohmann::json config = load_config(config_path);
    if (collect->parsed())
      return cmd_collect(task, tools_spec, per_tool, out, seed, config);
    if (train->parsed()) return cmd_train(task, data, out, which, epochs, seed);
    if (eval->parsed())
      return cmd_eval(task, model, ckpt, tools_spec, out, trials, seed,
                      wide_goals, line_length, config);
    if (score->parsed()) return cmd_score_drawing(meas_path, goal_path);
    if (render->parsed()) return cmd_render(scenario_path, out, seed);
    if (rollout->parsed())
      return cmd_sim_rollout(scenario_path, task, steps, out, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
