#include "bubbledyn/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "bubbledyn/tensor_io.hpp"
#include "json.hpp"

namespace bubbledyn {

namespace {

std::vector<float> pack_maps(const Dataset& d, bool next) {
  std::vector<float> out;
  out.reserve(d.size() * 2 * kPoolRows * kPoolCols);
  for (const auto& t : d.transitions) {
    const auto& m = next ? t.s_next.tactile : t.s.tactile;
    out.insert(out.end(), m.data.begin(), m.data.end());
  }
  return out;
}

std::vector<float> pack_vec6(const Dataset& d,
                             Eigen::Matrix<double, 6, 1> (*get)(const Transition&)) {
  std::vector<float> out;
  out.reserve(d.size() * 6);
  for (const auto& t : d.transitions) {
    auto v = get(t);
    for (int i = 0; i < 6; ++i) out.push_back(float(v[i]));
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const uint32_t n = uint32_t(d.size());

  struct Field {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;
  };
  std::vector<Field> fields;
  fields.push_back({"tactile", {n, 2, kPoolRows, kPoolCols}, pack_maps(d, false)});
  fields.push_back({"tactile_next", {n, 2, kPoolRows, kPoolCols}, pack_maps(d, true)});
  fields.push_back({"wrench", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.s.wrench.vec6(); })});
  fields.push_back({"wrench_next", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.s_next.wrench.vec6(); })});
  fields.push_back({"grasp_pose", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.s.grasp_pose.vec6(); })});
  fields.push_back({"grasp_pose_next", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.s_next.grasp_pose.vec6(); })});
  fields.push_back({"q_obs", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.q_obs.vec6(); })});
  fields.push_back({"q_obs_next", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.q_obs_next.vec6(); })});
  fields.push_back({"q_true", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.q_true.vec6(); })});
  fields.push_back({"q_true_next", {n, 6}, pack_vec6(d, +[](const Transition& t) { return t.q_true_next.vec6(); })});
  {
    Field f{"action", {n, 4}, {}};
    for (const auto& t : d.transitions) {
      auto v = t.action.vec4();
      for (int i = 0; i < 4; ++i) f.data.push_back(float(v[i]));
    }
    fields.push_back(std::move(f));
  }
  {
    Field f{"object_id", {n}, {}};
    for (const auto& t : d.transitions) f.data.push_back(float(t.object_id));
    fields.push_back(std::move(f));
  }

  nlohmann::json manifest;
  manifest["task"] = d.task;
  manifest["objects"] = d.objects;
  manifest["n_transitions"] = n;
  for (const auto& f : fields) {
    std::string file = f.name + ".btns";
    tensor_write((fs::path(dir) / file).string(), f.dims, f.data);
    manifest["fields"][f.name] = {{"filename", file}, {"dims", f.dims}};
  }
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("load_dataset: no manifest in " + dir);
  nlohmann::json manifest;
  mf >> manifest;

  Dataset d;
  d.task = manifest.value("task", "");
  for (const auto& o : manifest["objects"]) d.objects.push_back(o);
  uint32_t n = manifest["n_transitions"];

  auto read = [&](const std::string& name) {
    std::string file = manifest["fields"][name]["filename"];
    return tensor_read((fs::path(dir) / file).string());
  };
  TensorData tac = read("tactile"), tac_n = read("tactile_next");
  TensorData wr = read("wrench"), wr_n = read("wrench_next");
  TensorData gp = read("grasp_pose"), gp_n = read("grasp_pose_next");
  TensorData qo = read("q_obs"), qo_n = read("q_obs_next");
  TensorData qt = read("q_true"), qt_n = read("q_true_next");
  TensorData act = read("action"), oid = read("object_id");

  auto vec6_at = [](const TensorData& t, size_t i) {
    Eigen::Matrix<double, 6, 1> v;
    for (int k = 0; k < 6; ++k) v[k] = t.data[i * 6 + k];
    return v;
  };
  const size_t msz = 2 * kPoolRows * kPoolCols;
  d.transitions.resize(n);
  for (size_t i = 0; i < n; ++i) {
    Transition& t = d.transitions[i];
    t.s.tactile = DepthMapPair(kPoolRows, kPoolCols);
    t.s_next.tactile = DepthMapPair(kPoolRows, kPoolCols);
    std::copy_n(tac.data.begin() + i * msz, msz, t.s.tactile.data.begin());
    std::copy_n(tac_n.data.begin() + i * msz, msz, t.s_next.tactile.data.begin());
    t.s.wrench = Wrench6::from_vec6(vec6_at(wr, i));
    t.s_next.wrench = Wrench6::from_vec6(vec6_at(wr_n, i));
    t.s.grasp_pose = PoseAA::from_vec6(vec6_at(gp, i));
    t.s_next.grasp_pose = PoseAA::from_vec6(vec6_at(gp_n, i));
    t.q_obs = PoseAA::from_vec6(vec6_at(qo, i));
    t.q_obs_next = PoseAA::from_vec6(vec6_at(qo_n, i));
    t.q_true = PoseAA::from_vec6(vec6_at(qt, i));
    t.q_true_next = PoseAA::from_vec6(vec6_at(qt_n, i));
    t.action = Action4{act.data[i * 4], act.data[i * 4 + 1], act.data[i * 4 + 2],
                       act.data[i * 4 + 3]};
    t.object_id = int(oid.data[i]);
  }
  return d;
}

}  // namespace bubbledyn
