#include "bubbledyn/baselines.hpp"

namespace bubbledyn {

using nn::Tensor;

PoseAA robot_action_model(const PoseAA& r, const Action4& a) {
  double phi = r.planar_angle() + a.dphi;
  return PoseAA::planar(r.position.y() + a.dy, r.position.z() + a.dz, phi);
}

Eigen::VectorXd pack_dyn_input(const Eigen::VectorXd& z, const Wrench6& w,
                               const PoseAA& r, const Eigen::VectorXd& obj_emb,
                               const Action4& a) {
  Eigen::VectorXd in(kDynInputDim);
  in.segment(0, kTactileEmbedDim) = z;
  in.segment(kTactileEmbedDim, 6) = w.vec6() * kWrenchScale;
  Eigen::Matrix<double, 6, 1> rv = r.vec6();
  rv.head<3>() *= kPosScale;
  in.segment(kTactileEmbedDim + 6, 6) = rv;
  in.segment(kTactileEmbedDim + 12, kObjectEmbedDim) = obj_emb;
  Eigen::Vector4d av = a.vec4();
  for (int k = 0; k < 4; ++k) in[kTactileEmbedDim + 12 + kObjectEmbedDim + k] =
      av[k] * kActScale[k];
  return in;
}

void unpack_dyn_output(const Eigen::VectorXd& out, Eigen::VectorXd* dz,
                       Eigen::VectorXd* dw, Eigen::VectorXd* dr) {
  *dz = out.segment(0, kTactileEmbedDim);
  // Network outputs are in scaled units; undo the scaling here.
  *dw = out.segment(kTactileEmbedDim, 6) / kWrenchScale;
  if (dr) {
    if (out.size() < kDynOutputDim) {
      dr->setZero(6);
    } else {
      *dr = out.segment(kTactileEmbedDim + 6, 6);
      dr->head<3>() /= kPosScale;
    }
  }
}

namespace {

Eigen::VectorXd seq_forward1(nn::Sequential<float>& net,
                             const Eigen::VectorXd& in) {
  Tensor<float> x({1, int(in.size())});
  for (int i = 0; i < in.size(); ++i) x.d[i] = float(in[i]);
  Tensor<float> y = net.forward(x, false);
  Eigen::VectorXd out(int(y.per_sample()));
  for (int i = 0; i < out.size(); ++i) out[i] = y.d[i];
  return out;
}

// Shared latent-dynamics step: advance (z, w, r) with a learned net, then
// refresh the object-pose estimate by observing the decoded membrane.
RolloutState latent_step(TactileAutoencoder* ae, nn::Sequential<float>* net,
                         const Eigen::VectorXd& obj_emb,
                         const ObjectModel* icp_model, const CameraModel& left,
                         const CameraModel& right, const ContactConfig& contact,
                         const IcpConfig& icp, std::mt19937_64& rng,
                         const RolloutState& s, const Action4& a) {
  RolloutState out = s;
  if (s.failed) return out;
  Eigen::VectorXd in = pack_dyn_input(s.z, s.w, s.r, obj_emb, a);
  Eigen::VectorXd raw = seq_forward1(*net, in);
  Eigen::VectorXd dz, dw, dr;
  unpack_dyn_output(raw, &dz, &dw, &dr);
  out.z = s.z + dz;
  out.w = Wrench6::from_vec6(s.w.vec6() + dw);
  out.r = apply_pose_correction(robot_action_model(s.r, a), dr);

  MembraneState ms;
  ms.tactile = decode_tactile(*ae, out.z);
  ms.wrench = out.w;
  ms.grasp_pose = out.r;
  TaskState ts;
  ObsStatus st = observe(ms, *icp_model, left, right, contact, icp, rng, &ts);
  if (st == ObsStatus::ok) {
    out.q = ts.q;
  } else {
    out.failed = true;
  }
  return out;
}

}  // namespace

LearnedMembraneModel::LearnedMembraneModel(
    TactileAutoencoder* ae, MembraneDynamicsNet* dyn,
    Eigen::VectorXd object_embedding, const ObjectModel* icp_model,
    CameraModel left, CameraModel right, ContactConfig contact, IcpConfig icp,
    uint64_t seed)
    : ae_(ae),
      dyn_(dyn),
      obj_emb_(std::move(object_embedding)),
      icp_model_(icp_model),
      left_(left),
      right_(right),
      contact_(contact),
      icp_(icp),
      rng_(seed ^ 0x1ea61ull) {}

RolloutState LearnedMembraneModel::step(const RolloutState& s, const Action4& a) {
  return latent_step(ae_, &dyn_->net, obj_emb_, icp_model_, left_, right_,
                     contact_, icp_, rng_, s, a);
}

LinearDynamics::LinearDynamics(uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x11eaull);
  // Bias-free: the bias starts at zero and the trainer clears its gradient
  // every step, so it never moves.
  net.add<nn::Dense<float>>(kDynInputDim, kTactileEmbedDim + 6, rng);
}

LinearModel::LinearModel(TactileAutoencoder* ae, LinearDynamics* lin,
                         Eigen::VectorXd object_embedding,
                         const ObjectModel* icp_model, CameraModel left,
                         CameraModel right, ContactConfig contact,
                         IcpConfig icp, uint64_t seed)
    : ae_(ae),
      lin_(lin),
      obj_emb_(std::move(object_embedding)),
      icp_model_(icp_model),
      left_(left),
      right_(right),
      contact_(contact),
      icp_(icp),
      rng_(seed ^ 0x11ea2ull) {}

RolloutState LinearModel::step(const RolloutState& s, const Action4& a) {
  return latent_step(ae_, &lin_->net, obj_emb_, icp_model_, left_, right_,
                     contact_, icp_, rng_, s, a);
}

ObjectPoseDynamicsNet::ObjectPoseDynamicsNet(uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x0b9eull);
  net.add<nn::Dense<float>>(32, 200, rng);
  net.add<nn::ReLU<float>>();
  net.add<nn::Dense<float>>(200, 200, rng);
  net.add<nn::ReLU<float>>();
  net.add<nn::Dense<float>>(200, 18, rng);
}

namespace {

Eigen::VectorXd pack_objpose_input(const PoseAA& q, const Wrench6& w,
                                   const PoseAA& r,
                                   const Eigen::VectorXd& obj_emb,
                                   const Action4& a) {
  Eigen::VectorXd in(32);
  Eigen::Matrix<double, 6, 1> qv = q.vec6();
  qv.head<3>() *= kPosScale;
  in.segment(0, 6) = qv;
  in.segment(6, 6) = w.vec6() * kWrenchScale;
  Eigen::Matrix<double, 6, 1> rv = r.vec6();
  rv.head<3>() *= kPosScale;
  in.segment(12, 6) = rv;
  in.segment(18, kObjectEmbedDim) = obj_emb;
  Eigen::Vector4d av = a.vec4();
  for (int k = 0; k < 4; ++k) in[28 + k] = av[k] * kActScale[k];
  return in;
}

}  // namespace

TrainReport train_objpose_dynamics(const DynTrainData& d,
                                   const TrainConfig& cfg, ObjectEncoder* enc,
                                   ObjectPoseDynamicsNet* net) {
  const Dataset& ds = *d.data;
  if (ds.size() < 8) throw TrainError("train_objpose_dynamics: too few transitions");
  std::mt19937_64 rng(cfg.seed ^ 0x0b9e7ull);

  std::vector<Eigen::VectorXd> obj_emb;
  for (const auto& m : d.object_models) obj_emb.push_back(enc->encode(m.cloud));

  struct Row {
    Eigen::VectorXd in;
    Eigen::Matrix<double, 6, 1> dq_t, dw_t, dr_t;
  };
  std::vector<Row> rows(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    const Transition& t = ds.transitions[i];
    Row& r = rows[i];
    r.in = pack_objpose_input(t.q_obs, t.s.wrench, t.s.grasp_pose,
                              obj_emb[t.object_id], t.action);
    auto sp = [](Eigen::Matrix<double, 6, 1> v) {
      v.head<3>() *= kPosScale;
      return v;
    };
    r.dq_t = sp(t.q_obs_next.vec6() - t.q_obs.vec6());
    r.dw_t = (t.s_next.wrench.vec6() - t.s.wrench.vec6()) * kWrenchScale;
    PoseAA adv = robot_action_model(t.s.grasp_pose, t.action);
    r.dr_t = sp(t.s_next.grasp_pose.vec6() - adv.vec6());
  }

  auto idx_all = [&] {
    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), size_t(0));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  }();
  size_t n_val = std::max<size_t>(1, size_t(ds.size() * cfg.val_fraction));
  std::vector<size_t> train_idx(idx_all.begin(), idx_all.end() - n_val);
  std::vector<size_t> val_idx(idx_all.end() - n_val, idx_all.end());

  nn::Adam<float> opt(net->net.params(), cfg.lr, cfg.beta1, cfg.beta2);

  auto batch_loss = [&](const std::vector<size_t>& sel, bool train) {
    int n = int(sel.size());
    Tensor<float> x({n, 32});
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 32; ++k)
        x.d[size_t(i) * 32 + k] = float(rows[sel[i]].in[k]);
    Tensor<float> y = net->net.forward(x, train);
    double loss = 0.0;
    Tensor<float> gy(y.shape);
    for (int i = 0; i < n; ++i) {
      const Row& r = rows[sel[i]];
      for (int k = 0; k < 6; ++k) {
        double dq = y.d[size_t(i) * 18 + k] - r.dq_t[k];
        double dw = y.d[size_t(i) * 18 + 6 + k] - r.dw_t[k];
        double dr = y.d[size_t(i) * 18 + 12 + k] - r.dr_t[k];
        loss += (dq * dq + dw * dw + dr * dr) / (18.0 * n);
        gy.d[size_t(i) * 18 + k] = float(2.0 * dq / (18.0 * n));
        gy.d[size_t(i) * 18 + 6 + k] = float(2.0 * dw / (18.0 * n));
        gy.d[size_t(i) * 18 + 12 + k] = float(2.0 * dr / (18.0 * n));
      }
    }
    if (!train) return loss;
    net->net.zero_grad();
    net->net.backward(gy);
    opt.step();
    return loss;
  };

  TrainReport rep;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_w;
  int since = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double tl = 0.0;
    size_t seen = 0;
    for (size_t b = 0; b < train_idx.size(); b += cfg.batch_size) {
      size_t e = std::min(train_idx.size(), b + size_t(cfg.batch_size));
      std::vector<size_t> sel(train_idx.begin() + b, train_idx.begin() + e);
      tl += batch_loss(sel, true) * sel.size();
      seen += sel.size();
    }
    double vl = batch_loss(val_idx, false);
    rep.train_losses.push_back(tl / std::max<size_t>(1, seen));
    rep.val_losses.push_back(vl);
    if (vl < best) {
      best = vl;
      best_w.clear();
      for (auto* p : net->net.params()) best_w.push_back(p->w);
      rep.best_epoch = epoch;
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
  }
  if (!best_w.empty()) {
    size_t i = 0;
    for (auto* p : net->net.params()) p->w = best_w[i++];
  }
  rep.best_val_loss = best;
  rep.final_train_loss = rep.train_losses.empty() ? 0 : rep.train_losses.back();
  rep.final_val_loss = rep.val_losses.empty() ? 0 : rep.val_losses.back();
  return rep;
}

ObjectPoseModel::ObjectPoseModel(ObjectPoseDynamicsNet* net,
                                 Eigen::VectorXd object_embedding)
    : net_(net), obj_emb_(std::move(object_embedding)) {}

RolloutState ObjectPoseModel::step(const RolloutState& s, const Action4& a) {
  RolloutState out = s;
  if (s.failed) return out;
  Eigen::VectorXd in = pack_objpose_input(s.q, s.w, s.r, obj_emb_, a);
  Eigen::VectorXd y = seq_forward1(net_->net, in);
  auto unscale = [](Eigen::Matrix<double, 6, 1> v) {
    v.head<3>() /= kPosScale;
    return v;
  };
  Eigen::Matrix<double, 6, 1> dq = unscale(y.segment(0, 6));
  Eigen::Matrix<double, 6, 1> dw = y.segment(6, 6) / kWrenchScale;
  Eigen::Matrix<double, 6, 1> dr = unscale(y.segment(12, 6));
  out.q = PoseAA::from_vec6(s.q.vec6() + dq);
  out.w = Wrench6::from_vec6(s.w.vec6() + dw);
  out.r = apply_pose_correction(robot_action_model(s.r, a), dr);
  return out;
}

RolloutState FixedModel::step(const RolloutState& s, const Action4& a) {
  RolloutState out = s;
  if (s.failed) return out;
  // The object is rigidly attached: its grasp-frame pose, the tactile
  // signature and the wrench are all carried over unchanged.
  out.r = robot_action_model(s.r, a);
  return out;
}

RolloutState JacobianModel::step(const RolloutState& s, const Action4& a) {
  RolloutState out = s;
  if (s.failed) return out;
  PoseAA r_new = robot_action_model(s.r, a);
  // Grasp-frame object pose counter-rotates so the object keeps its world
  // orientation while translating with the gripper.
  Eigen::Matrix4d rel = pose_to_homogeneous(pose_inverse(r_new)) *
                        pose_to_homogeneous(s.r) *
                        pose_to_homogeneous(s.q);
  out.q = pose_from_homogeneous(rel);
  out.r = r_new;
  return out;
}

Action4 pseudo_random_policy(const ActionBox& box,
                             const std::function<bool(const Action4&)>& accept,
                             std::mt19937_64& rng, int max_tries) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < max_tries; ++t) {
    Eigen::Vector4d v;
    for (int k = 0; k < 4; ++k)
      v[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * u(rng);
    Action4 a = Action4::from_vec4(v);
    if (accept(a)) return a;
  }
  throw std::runtime_error("pseudo_random_policy: no acceptable action in " +
                           std::to_string(max_tries) + " tries");
}

}  // namespace bubbledyn
