#pragma once

#include <functional>
#include <random>

#include "bubbledyn/models.hpp"
#include "bubbledyn/observation.hpp"

namespace bubbledyn {

// Kinematic gripper advance: world-frame translation plus planar rotation,
// identical to the rigid-motion part of the simulator step.
PoseAA robot_action_model(const PoseAA& r, const Action4& a);

// State a forward model rolls out: tactile embedding, wrench, grasp pose and
// the derived object-pose estimate.
struct RolloutState {
  Eigen::VectorXd z;  // tactile embedding, 15
  Wrench6 w;
  PoseAA r;  // grasp pose, world
  PoseAA q;  // object pose, grasp frame
  bool failed = false;
};

class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual RolloutState step(const RolloutState& s, const Action4& a) = 0;
  virtual std::string name() const = 0;
};

// Full learned pipeline: membrane dynamics in latent space, decoded map fed
// through the observation model for the object pose.
class LearnedMembraneModel : public StepModel {
 public:
  LearnedMembraneModel(TactileAutoencoder* ae, MembraneDynamicsNet* dyn,
                       Eigen::VectorXd object_embedding,
                       const ObjectModel* icp_model, CameraModel left,
                       CameraModel right, ContactConfig contact, IcpConfig icp,
                       uint64_t seed);
  RolloutState step(const RolloutState& s, const Action4& a) override;
  std::string name() const override { return "learned"; }

 private:
  TactileAutoencoder* ae_;
  MembraneDynamicsNet* dyn_;
  Eigen::VectorXd obj_emb_;
  const ObjectModel* icp_model_;
  CameraModel left_, right_;
  ContactConfig contact_;
  IcpConfig icp_;
  std::mt19937_64 rng_;
};

// Single linear map from the 41-dim input to [dz; dw]; pose advances
// kinematically with no learned correction.
class LinearDynamics {
 public:
  explicit LinearDynamics(uint64_t seed = 0);
  nn::Sequential<float> net;  // one bias-free dense layer, 41 -> 21
};

TrainReport train_linear_dynamics(const DynTrainData& d, const TrainConfig& cfg,
                                  TactileAutoencoder* ae, ObjectEncoder* enc,
                                  LinearDynamics* lin);

class LinearModel : public StepModel {
 public:
  LinearModel(TactileAutoencoder* ae, LinearDynamics* lin,
              Eigen::VectorXd object_embedding, const ObjectModel* icp_model,
              CameraModel left, CameraModel right, ContactConfig contact,
              IcpConfig icp, uint64_t seed);
  RolloutState step(const RolloutState& s, const Action4& a) override;
  std::string name() const override { return "linear"; }

 private:
  TactileAutoencoder* ae_;
  LinearDynamics* lin_;
  Eigen::VectorXd obj_emb_;
  const ObjectModel* icp_model_;
  CameraModel left_, right_;
  ContactConfig contact_;
  IcpConfig icp_;
  std::mt19937_64 rng_;
};

// Direct object-pose dynamics: skips the membrane entirely and regresses the
// next pose and wrench from (q, w, r, object, a).
class ObjectPoseDynamicsNet {
 public:
  explicit ObjectPoseDynamicsNet(uint64_t seed = 0);
  nn::Sequential<float> net;  // 32 -> 200 -> 200 -> 18
};

TrainReport train_objpose_dynamics(const DynTrainData& d,
                                   const TrainConfig& cfg, ObjectEncoder* enc,
                                   ObjectPoseDynamicsNet* net);

class ObjectPoseModel : public StepModel {
 public:
  ObjectPoseModel(ObjectPoseDynamicsNet* net, Eigen::VectorXd object_embedding);
  RolloutState step(const RolloutState& s, const Action4& a) override;
  std::string name() const override { return "objpose"; }

 private:
  ObjectPoseDynamicsNet* net_;
  Eigen::VectorXd obj_emb_;
};

// Fixed-membrane baseline: the grasp is assumed perfectly rigid, so tactile,
// wrench and the relative object pose never change.
class FixedModel : public StepModel {
 public:
  RolloutState step(const RolloutState& s, const Action4& a) override;
  std::string name() const override { return "fixed"; }
};

// Jacobian baseline for drawing: the tool tip is assumed to track gripper
// translation one-to-one while orientation stays put.
class JacobianModel : public StepModel {
 public:
  RolloutState step(const RolloutState& s, const Action4& a) override;
  std::string name() const override { return "jacobian"; }
};

// Uniform box sample accepted by the predicate; throws after max_tries.
Action4 pseudo_random_policy(const ActionBox& box,
                             const std::function<bool(const Action4&)>& accept,
                             std::mt19937_64& rng, int max_tries = 1000);

// Shared input/output packing so every learned model sees the same scaling.
Eigen::VectorXd pack_dyn_input(const Eigen::VectorXd& z, const Wrench6& w,
                               const PoseAA& r, const Eigen::VectorXd& obj_emb,
                               const Action4& a);
void unpack_dyn_output(const Eigen::VectorXd& out, Eigen::VectorXd* dz,
                       Eigen::VectorXd* dw, Eigen::VectorXd* dr);

}  // namespace bubbledyn
