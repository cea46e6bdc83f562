#pragma once

#include <optional>

#include "bubbledyn/dataset.hpp"
#include "bubbledyn/nn.hpp"
#include "bubbledyn/observation.hpp"

namespace bubbledyn {

// Fixed feature scaling so every quantity enters the networks at O(1).
inline constexpr double kMapScale = 100.0;     // meters of deformation
inline constexpr double kWrenchScale = 0.1;    // newtons / newton-meters
inline constexpr double kPosScale = 10.0;      // pose translation, meters
inline constexpr double kActScale[4] = {10.0, 100.0, 100.0, 10.0};

inline constexpr int kTactileEmbedDim = 15;
inline constexpr int kObjectEmbedDim = 10;
inline constexpr int kDynInputDim = 15 + 6 + 6 + 10 + 4;   // 41
inline constexpr int kDynOutputDim = 15 + 6 + 6;           // 27

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double alpha1 = 1.0, alpha2 = 1e-4, alpha3 = 0.0;
  int batch_size = 64;
  int epochs = 200;
  int patience = 20;
  double val_fraction = 0.2;
  uint64_t seed = 0;
};

struct TrainReport {
  int best_epoch = -1;
  double best_val_loss = 0.0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  std::vector<double> train_losses, val_losses;
};

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Conv encoder to a 15-vector plus the mirror decoder back to 2x25x20.
template <class R>
class TactileAutoencoderT {
 public:
  explicit TactileAutoencoderT(uint64_t seed = 0) {
    std::mt19937_64 rng(seed ^ 0xae5eedull);
    encoder.template add<nn::Conv2d<R>>(2, 8, 5, rng);
    encoder.template add<nn::BatchNorm<R>>(8);
    encoder.template add<nn::ReLU<R>>();
    encoder.template add<nn::Conv2d<R>>(8, 16, 5, rng);
    encoder.template add<nn::BatchNorm<R>>(16);
    encoder.template add<nn::ReLU<R>>();
    encoder.template add<nn::Conv2d<R>>(16, 32, 5, rng);
    encoder.template add<nn::BatchNorm<R>>(32);
    encoder.template add<nn::ReLU<R>>();
    encoder.template add<nn::Reshape<R>>(std::vector<int>{32 * 13 * 8});
    encoder.template add<nn::Dense<R>>(32 * 13 * 8, kTactileEmbedDim, rng);

    decoder.template add<nn::Dense<R>>(kTactileEmbedDim, 32 * 13 * 8, rng);
    decoder.template add<nn::Reshape<R>>(std::vector<int>{32, 13, 8});
    decoder.template add<nn::BatchNorm<R>>(32);
    decoder.template add<nn::ReLU<R>>();
    decoder.template add<nn::Deconv2d<R>>(32, 16, 5, rng);
    decoder.template add<nn::BatchNorm<R>>(16);
    decoder.template add<nn::ReLU<R>>();
    decoder.template add<nn::Deconv2d<R>>(16, 16, 5, rng);
    decoder.template add<nn::BatchNorm<R>>(16);
    decoder.template add<nn::ReLU<R>>();
    decoder.template add<nn::Deconv2d<R>>(16, 2, 5, rng);
  }

  nn::Sequential<R> encoder, decoder;
};
using TactileAutoencoder = TactileAutoencoderT<float>;

// Shared per-point MLP + max pool + head; pretrained as a shape classifier,
// then everything but the final 10-dim layer is frozen.
template <class R>
class ObjectEncoderT {
 public:
  explicit ObjectEncoderT(uint64_t seed = 0) {
    std::mt19937_64 rng(seed ^ 0x0b1ec7ull);
    point_mlp.template add<nn::Dense<R>>(3, 64, rng);
    point_mlp.template add<nn::ReLU<R>>();
    point_mlp.template add<nn::Dense<R>>(64, 128, rng);
    point_mlp.template add<nn::ReLU<R>>();
    post_pool.template add<nn::Dense<R>>(128, 64, rng);
    post_pool.template add<nn::ReLU<R>>();
    head.template add<nn::Dense<R>>(64, kObjectEmbedDim, rng);
  }

  // Deterministic embedding, exactly permutation invariant.
  Eigen::VectorXd encode(const PointCloud& cloud);
  // 64-dim pooled feature before the head (used to cache frozen trunks).
  Eigen::VectorXd trunk_feature(const PointCloud& cloud);

  nn::Sequential<R> point_mlp, post_pool, head;
};
using ObjectEncoder = ObjectEncoderT<float>;

template <>
Eigen::VectorXd ObjectEncoderT<float>::encode(const PointCloud& cloud);
template <>
Eigen::VectorXd ObjectEncoderT<float>::trunk_feature(const PointCloud& cloud);

template <class R>
class MembraneDynamicsNetT {
 public:
  explicit MembraneDynamicsNetT(uint64_t seed = 0) {
    std::mt19937_64 rng(seed ^ 0xd1ca57ull);
    net.template add<nn::Dense<R>>(kDynInputDim, 200, rng);
    net.template add<nn::ReLU<R>>();
    net.template add<nn::Dense<R>>(200, 200, rng);
    net.template add<nn::ReLU<R>>();
    net.template add<nn::Dense<R>>(200, kDynOutputDim, rng);
  }
  nn::Sequential<R> net;
};
using MembraneDynamicsNet = MembraneDynamicsNetT<float>;

// ---- forward helpers ----

nn::Tensor<float> maps_to_tensor(const std::vector<const DepthMapPair*>& maps);
DepthMapPair tensor_to_map(const nn::Tensor<float>& t, int sample);

Eigen::VectorXd encode_tactile(TactileAutoencoder& ae, const DepthMapPair& pooled);
DepthMapPair decode_tactile(TactileAutoencoder& ae, const Eigen::VectorXd& emb);

// r' = robot_action_model(r, a) composed with the predicted correction.
PoseAA apply_pose_correction(const PoseAA& advanced, const Eigen::VectorXd& dr);

// ---- training ----

TrainReport train_autoencoder(const std::vector<DepthMapPair>& maps,
                              const TrainConfig& cfg, TactileAutoencoder* ae);

// Classification pretraining of the object encoder on synthetic primitive
// families (box, cylinder/capsule, wedge, trapezoid), then only the head
// stays trainable.
TrainReport pretrain_object_encoder(const TrainConfig& cfg, ObjectEncoder* enc);

struct DynTrainData {
  const Dataset* data = nullptr;
  std::vector<ObjectModel> object_models;  // indexed by object_id
};

TrainReport train_dynamics(const DynTrainData& d, const TrainConfig& cfg,
                           TactileAutoencoder* ae, ObjectEncoder* enc,
                           MembraneDynamicsNet* dyn);

// Held-out one-step tactile MSE in decoded-map space for the trained model
// and for the identity (fixed-membrane) predictor, on the validation split.
struct TactileMseEval {
  double model_mse = 0.0;
  double identity_mse = 0.0;
};
TactileMseEval eval_dynamics_tactile_mse(const DynTrainData& d,
                                         const TrainConfig& cfg,
                                         TactileAutoencoder& ae,
                                         ObjectEncoder& enc,
                                         MembraneDynamicsNet& dyn);

// ---- gradient checking (64-bit mode) ----

// Max relative error between analytic parameter gradients and central finite
// differences of a fixed linear functional of the output.
double gradient_check(nn::Sequential<double>& net, nn::Tensor<double> input,
                      uint64_t seed, int max_params = 256);

// ---- checkpoints ----

void save_sequential(nn::Sequential<float>& net, const std::string& dir,
                     const std::string& prefix);
void load_sequential(nn::Sequential<float>& net, const std::string& dir,
                     const std::string& prefix);

void save_autoencoder(TactileAutoencoder& ae, const std::string& dir,
                      const TrainConfig& cfg, const TrainReport& rep);
void load_autoencoder(TactileAutoencoder& ae, const std::string& dir);
void save_object_encoder(ObjectEncoder& enc, const std::string& dir);
void load_object_encoder(ObjectEncoder& enc, const std::string& dir);
void save_dynamics_net(MembraneDynamicsNet& dyn, const std::string& dir,
                       const std::string& kind, const TrainConfig& cfg,
                       const TrainReport& rep);
void load_dynamics_net(MembraneDynamicsNet& dyn, const std::string& dir);

}  // namespace bubbledyn
