#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bubbledyn/models.hpp"
#include "bubbledyn/observation.hpp"
#include "bubbledyn/simulator.hpp"
#include "bubbledyn/tactile.hpp"
#include "bubbledyn/tasks.hpp"

namespace py = pybind11;
using namespace bubbledyn;

namespace {

DepthMapPair map_from_array(py::array_t<float, py::array::c_style> a) {
  auto buf = a.request();
  if (buf.ndim != 3 || buf.shape[0] != 2)
    throw std::invalid_argument("expected a (2, rows, cols) float32 array");
  DepthMapPair m(int(buf.shape[1]), int(buf.shape[2]));
  std::memcpy(m.data.data(), buf.ptr, m.data.size() * sizeof(float));
  return m;
}

py::array_t<float> map_to_array(const DepthMapPair& m) {
  py::array_t<float> a({2, m.rows, m.cols});
  std::memcpy(a.mutable_data(), m.data.data(), m.data.size() * sizeof(float));
  return a;
}

BitMask mask_from_array(py::array_t<uint8_t, py::array::c_style> a) {
  auto buf = a.request();
  if (buf.ndim != 2) throw std::invalid_argument("expected a 2-D uint8 array");
  BitMask m(int(buf.shape[0]), int(buf.shape[1]));
  const uint8_t* p = static_cast<const uint8_t*>(buf.ptr);
  for (size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = p[i] ? 1 : 0;
  return m;
}

}  // namespace

PYBIND11_MODULE(_bubbledyn, mod) {
  mod.doc() = "Membrane-grasp simulator, tactile models, and task scoring";

  py::class_<PoseAA>(mod, "PoseAA")
      .def(py::init<>())
      .def_static("planar", &PoseAA::planar, py::arg("y"), py::arg("z"),
                  py::arg("theta"))
      .def_readwrite("position", &PoseAA::position)
      .def_readwrite("axis_angle", &PoseAA::axis_angle)
      .def("planar_angle", &PoseAA::planar_angle)
      .def("vec6", &PoseAA::vec6);

  py::class_<Action4>(mod, "Action4")
      .def(py::init<>())
      .def(py::init([](double gw, double dy, double dz, double dphi) {
             return Action4{gw, dy, dz, dphi};
           }),
           py::arg("gw"), py::arg("dy"), py::arg("dz"), py::arg("dphi"))
      .def_readwrite("gw", &Action4::gw)
      .def_readwrite("dy", &Action4::dy)
      .def_readwrite("dz", &Action4::dz)
      .def_readwrite("dphi", &Action4::dphi);

  py::class_<ToolShape>(mod, "ToolShape")
      .def_readonly("name", &ToolShape::name)
      .def_readonly("extrusion_half_width", &ToolShape::extrusion_half_width);

  py::class_<SimConfig>(mod, "SimConfig")
      .def(py::init<>())
      .def_readwrite("membrane_k", &SimConfig::membrane_k)
      .def_readwrite("mu", &SimConfig::mu)
      .def_readwrite("sensor_noise_sigma", &SimConfig::sensor_noise_sigma);

  py::class_<SimState>(mod, "SimState")
      .def(py::init<>())
      .def_readwrite("grasp_pose", &SimState::grasp_pose)
      .def_readwrite("object_pose", &SimState::object_pose)
      .def_readwrite("width", &SimState::width)
      .def_readwrite("in_contact", &SimState::in_contact)
      .def_readwrite("dropped", &SimState::dropped);

  py::class_<MembraneSimulator>(mod, "MembraneSimulator")
      .def(py::init<ToolShape, SimConfig, uint64_t>(), py::arg("tool"),
           py::arg("config") = SimConfig{}, py::arg("seed") = 0)
      .def("make_grasp", &MembraneSimulator::make_grasp, py::arg("grasp"),
           py::arg("width"), py::arg("rel_y") = 0.0, py::arg("rel_z") = 0.0,
           py::arg("rel_theta") = 0.0)
      .def("sim_step", &MembraneSimulator::sim_step)
      .def("grip_force", &MembraneSimulator::grip_force)
      .def("render",
           [](const MembraneSimulator& s, const SimState& st, bool noise,
              uint64_t seed) {
             return map_to_array(s.render_depth_pair(st, noise, seed));
           },
           py::arg("state"), py::arg("noise") = false, py::arg("seed") = 0)
      .def("wrench",
           [](const MembraneSimulator& s, const SimState& st) {
             return s.compute_wrench(st).vec6();
           })
      .def_static("relative_angle", &MembraneSimulator::relative_angle);

  mod.def("drawing_tool_set", &drawing_tool_set);
  mod.def("pivoting_tool_set", &pivoting_tool_set);
  mod.def("drawing_action_box_lo_hi", [](double alpha) {
    ActionBox b = drawing_action_box(alpha);
    return std::make_pair(b.lo, b.hi);
  }, py::arg("alpha_impedance") = 0.010);
  mod.def("pivoting_action_box_lo_hi", [](double d_env) {
    ActionBox b = pivoting_action_box(d_env);
    return std::make_pair(b.lo, b.hi);
  });

  mod.def("downsample", [](py::array_t<float, py::array::c_style> a) {
    return map_to_array(downsample(map_from_array(a)));
  });
  mod.def("upsample", [](py::array_t<float, py::array::c_style> a) {
    return map_to_array(upsample(map_from_array(a)));
  });

  mod.def("pivoting_score", &pivoting_score, py::arg("theta_achieved_deg"),
          py::arg("theta_goal_deg"));
  mod.def("drawing_score",
          [](py::array_t<uint8_t, py::array::c_style> meas,
             py::array_t<uint8_t, py::array::c_style> goal) {
            DrawingScore s =
                drawing_score(mask_from_array(meas), mask_from_array(goal));
            return std::make_pair(s.on_line, s.coverage);
          });

  py::class_<TactileAutoencoder>(mod, "TactileAutoencoder")
      .def(py::init<uint64_t>(), py::arg("seed") = 0)
      .def("load", [](TactileAutoencoder& ae, const std::string& dir) {
        load_autoencoder(ae, dir);
      })
      .def("encode",
           [](TactileAutoencoder& ae, py::array_t<float, py::array::c_style> a) {
             return encode_tactile(ae, map_from_array(a));
           })
      .def("decode", [](TactileAutoencoder& ae, const Eigen::VectorXd& z) {
        return map_to_array(decode_tactile(ae, z));
      });
}
