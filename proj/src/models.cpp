#include "bubbledyn/models.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "bubbledyn/baselines.hpp"
#include "bubbledyn/simulator.hpp"
#include "bubbledyn/tensor_io.hpp"

namespace bubbledyn {

namespace fs = std::filesystem;
using nn::Tensor;

// ---- tensor conversions ----

nn::Tensor<float> maps_to_tensor(const std::vector<const DepthMapPair*>& maps) {
  if (maps.empty()) throw TrainError("maps_to_tensor: empty batch");
  int r = maps[0]->rows, c = maps[0]->cols;
  Tensor<float> t({int(maps.size()), 2, r, c});
  size_t per = 2 * size_t(r) * c;
  for (size_t i = 0; i < maps.size(); ++i) {
    if (maps[i]->rows != r || maps[i]->cols != c)
      throw TrainError("maps_to_tensor: mixed shapes");
    for (size_t j = 0; j < per; ++j)
      t.d[i * per + j] = maps[i]->data[j] * float(kMapScale);
  }
  return t;
}

DepthMapPair tensor_to_map(const nn::Tensor<float>& t, int sample) {
  int r = t.shape[2], c = t.shape[3];
  DepthMapPair m(r, c);
  size_t per = 2 * size_t(r) * c;
  for (size_t j = 0; j < per; ++j)
    m.data[j] = t.d[size_t(sample) * per + j] / float(kMapScale);
  return m;
}

Eigen::VectorXd encode_tactile(TactileAutoencoder& ae, const DepthMapPair& pooled) {
  Tensor<float> x = maps_to_tensor({&pooled});
  Tensor<float> z = ae.encoder.forward(x, false);
  Eigen::VectorXd out(kTactileEmbedDim);
  for (int i = 0; i < kTactileEmbedDim; ++i) out[i] = z.d[i];
  return out;
}

DepthMapPair decode_tactile(TactileAutoencoder& ae, const Eigen::VectorXd& emb) {
  Tensor<float> z({1, kTactileEmbedDim});
  for (int i = 0; i < kTactileEmbedDim; ++i) z.d[i] = float(emb[i]);
  Tensor<float> y = ae.decoder.forward(z, false);
  return tensor_to_map(y, 0);
}

PoseAA apply_pose_correction(const PoseAA& advanced, const Eigen::VectorXd& dr) {
  Eigen::Matrix<double, 6, 1> v = advanced.vec6();
  for (int i = 0; i < 6; ++i) v[i] += dr[i];
  return PoseAA::from_vec6(v);
}

// ---- object encoder forward (shared by inference and training) ----

namespace {

// Forward a batch of clouds through the trunk; records argmax indices for the
// max pool so training can scatter gradients back.
struct TrunkPass {
  Tensor<float> point_in;    // [N*P, 3]
  Tensor<float> point_out;   // [N*P, 128]
  Tensor<float> pooled;      // [N, 128]
  std::vector<int> argmax;   // N * 128, index into the P points of each cloud
  Tensor<float> feature;     // [N, 64]
  int n = 0, p = 0;
};

TrunkPass trunk_forward(ObjectEncoder& enc,
                        const std::vector<const PointCloud*>& clouds,
                        bool train) {
  TrunkPass t;
  t.n = int(clouds.size());
  t.p = int(clouds[0]->points.size());
  t.point_in = Tensor<float>({t.n * t.p, 3});
  for (int i = 0; i < t.n; ++i) {
    if (int(clouds[i]->points.size()) != t.p)
      throw TrainError("trunk_forward: ragged clouds");
    for (int j = 0; j < t.p; ++j)
      for (int k = 0; k < 3; ++k)
        t.point_in.d[(size_t(i) * t.p + j) * 3 + k] =
            float(clouds[i]->points[j][k] * kPosScale);
  }
  t.point_out = enc.point_mlp.forward(t.point_in, train);
  t.pooled = Tensor<float>({t.n, 128});
  t.argmax.assign(size_t(t.n) * 128, 0);
  for (int i = 0; i < t.n; ++i)
    for (int f = 0; f < 128; ++f) {
      float best = -1e30f;
      int bj = 0;
      for (int j = 0; j < t.p; ++j) {
        float v = t.point_out.d[(size_t(i) * t.p + j) * 128 + f];
        if (v > best) {
          best = v;
          bj = j;
        }
      }
      t.pooled.d[size_t(i) * 128 + f] = best;
      t.argmax[size_t(i) * 128 + f] = bj;
    }
  t.feature = enc.post_pool.forward(t.pooled, train);
  return t;
}

void trunk_backward(ObjectEncoder& enc, const TrunkPass& t,
                    const Tensor<float>& gfeature) {
  Tensor<float> gpooled = enc.post_pool.backward(gfeature);
  Tensor<float> gpoints({t.n * t.p, 128});
  for (int i = 0; i < t.n; ++i)
    for (int f = 0; f < 128; ++f) {
      int j = t.argmax[size_t(i) * 128 + f];
      gpoints.d[(size_t(i) * t.p + j) * 128 + f] += gpooled.d[size_t(i) * 128 + f];
    }
  enc.point_mlp.backward(gpoints);
}

}  // namespace

template <>
Eigen::VectorXd ObjectEncoderT<float>::trunk_feature(const PointCloud& cloud) {
  TrunkPass t = trunk_forward(*this, {&cloud}, false);
  Eigen::VectorXd f(64);
  for (int i = 0; i < 64; ++i) f[i] = t.feature.d[i];
  return f;
}

template <>
Eigen::VectorXd ObjectEncoderT<float>::encode(const PointCloud& cloud) {
  Eigen::VectorXd f = trunk_feature(cloud);
  Tensor<float> fin({1, 64});
  for (int i = 0; i < 64; ++i) fin.d[i] = float(f[i]);
  Tensor<float> e = head.forward(fin, false);
  Eigen::VectorXd out(kObjectEmbedDim);
  for (int i = 0; i < kObjectEmbedDim; ++i) out[i] = e.d[i];
  return out;
}

// ---- training helpers ----

namespace {

std::vector<size_t> shuffled_indices(size_t n, std::mt19937_64& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t(0));
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

struct Snapshot {
  std::vector<std::vector<float>> weights;
  std::vector<std::vector<float>> bn_stats;

  static Snapshot take(const std::vector<nn::Sequential<float>*>& nets) {
    Snapshot s;
    for (auto* net : nets) {
      for (auto* p : net->params()) s.weights.push_back(p->w);
      for (auto* l : net->layers())
        if (auto* bn = dynamic_cast<nn::BatchNorm<float>*>(l)) {
          s.bn_stats.push_back(bn->running_mean());
          s.bn_stats.push_back(bn->running_var());
        }
    }
    return s;
  }
  void restore(const std::vector<nn::Sequential<float>*>& nets) const {
    size_t wi = 0, bi = 0;
    for (auto* net : nets) {
      for (auto* p : net->params()) p->w = weights[wi++];
      for (auto* l : net->layers())
        if (auto* bn = dynamic_cast<nn::BatchNorm<float>*>(l)) {
          bn->running_mean() = bn_stats[bi++];
          bn->running_var() = bn_stats[bi++];
        }
    }
  }
};

// Runs the standard epoch loop: shuffle, minibatch step, validate, keep the
// best-validation weights, stop after `patience` epochs without improvement.
TrainReport run_epochs(
    const TrainConfig& cfg, size_t n_train,
    const std::vector<nn::Sequential<float>*>& nets,
    const std::function<double(const std::vector<size_t>&)>& train_batch,
    const std::function<double()>& validate, std::mt19937_64& rng) {
  TrainReport rep;
  double best = std::numeric_limits<double>::infinity();
  Snapshot best_snap = Snapshot::take(nets);
  int since = 0;
  std::vector<size_t> order(n_train);
  std::iota(order.begin(), order.end(), size_t(0));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    size_t seen = 0;
    for (size_t b = 0; b < n_train; b += cfg.batch_size) {
      size_t e = std::min(n_train, b + cfg.batch_size);
      std::vector<size_t> batch(order.begin() + b, order.begin() + e);
      train_loss += train_batch(batch) * batch.size();
      seen += batch.size();
    }
    train_loss /= std::max<size_t>(1, seen);
    double val_loss = validate();
    rep.train_losses.push_back(train_loss);
    rep.val_losses.push_back(val_loss);
    if (val_loss < best) {
      best = val_loss;
      best_snap = Snapshot::take(nets);
      rep.best_epoch = epoch;
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
  }
  best_snap.restore(nets);
  rep.best_val_loss = best;
  rep.final_train_loss = rep.train_losses.empty() ? 0.0 : rep.train_losses.back();
  rep.final_val_loss = rep.val_losses.empty() ? 0.0 : rep.val_losses.back();
  return rep;
}

}  // namespace

// ---- autoencoder training ----

TrainReport train_autoencoder(const std::vector<DepthMapPair>& maps,
                              const TrainConfig& cfg, TactileAutoencoder* ae) {
  if (maps.size() < 4) throw TrainError("train_autoencoder: too few maps");
  std::mt19937_64 rng(cfg.seed ^ 0xaeull);
  auto idx = shuffled_indices(maps.size(), rng);
  size_t n_val = std::max<size_t>(1, size_t(maps.size() * cfg.val_fraction));
  size_t n_train = maps.size() - n_val;
  std::vector<size_t> train_idx(idx.begin(), idx.begin() + n_train);
  std::vector<size_t> val_idx(idx.begin() + n_train, idx.end());

  auto params = ae->encoder.params();
  for (auto* p : ae->decoder.params()) params.push_back(p);
  nn::Adam<float> opt(params, cfg.lr, cfg.beta1, cfg.beta2);

  auto batch_loss = [&](const std::vector<size_t>& rows, bool train) {
    std::vector<const DepthMapPair*> ptrs;
    for (size_t r : rows) ptrs.push_back(&maps[r]);
    Tensor<float> x = maps_to_tensor(ptrs);
    Tensor<float> z = ae->encoder.forward(x, train);
    Tensor<float> y = ae->decoder.forward(z, train);
    double loss = 0.0;
    Tensor<float> gy(y.shape);
    double scale = 1.0 / double(y.d.size());
    for (size_t i = 0; i < y.d.size(); ++i) {
      double d = double(y.d[i]) - double(x.d[i]);
      loss += d * d * scale;
      gy.d[i] = float(2.0 * d * scale);
    }
    double zscale = cfg.alpha2 / double(z.d.size());
    for (size_t i = 0; i < z.d.size(); ++i)
      loss += double(z.d[i]) * double(z.d[i]) * zscale;
    if (!train) return loss;
    ae->encoder.zero_grad();
    ae->decoder.zero_grad();
    Tensor<float> gz = ae->decoder.backward(gy);
    for (size_t i = 0; i < z.d.size(); ++i)
      gz.d[i] += float(2.0 * zscale * z.d[i]);
    ae->encoder.backward(gz);
    opt.step();
    return loss;
  };

  auto train_batch = [&](const std::vector<size_t>& batch) {
    std::vector<size_t> rows;
    for (size_t b : batch) rows.push_back(train_idx[b]);
    return batch_loss(rows, true);
  };
  auto validate = [&] {
    double total = 0.0;
    size_t seen = 0;
    for (size_t b = 0; b < val_idx.size(); b += cfg.batch_size) {
      size_t e = std::min(val_idx.size(), b + cfg.batch_size);
      std::vector<size_t> rows(val_idx.begin() + b, val_idx.begin() + e);
      total += batch_loss(rows, false) * rows.size();
      seen += rows.size();
    }
    return total / std::max<size_t>(1, seen);
  };

  return run_epochs(cfg, n_train, {&ae->encoder, &ae->decoder}, train_batch,
                    validate, rng);
}

// ---- object encoder pretraining ----

namespace {

// One random tool per family, sampled around the nominal task geometry.
ToolShape random_primitive(int family, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double len = 0.05 + 0.08 * u(rng);
  double wid = 0.008 + 0.014 * u(rng);
  double ehw = 0.008 + 0.008 * u(rng);
  switch (family) {
    case 0:
      return make_rect_tool("pre_rect", wid, len, ehw);
    case 1:
      return make_capsule_tool("pre_capsule", wid / 2, len, ehw);
    case 2:
      return make_wedge_tool("pre_wedge", wid, len, ehw);
    default:
      return make_trapezoid_tool("pre_trap", wid, wid * (0.3 + 0.4 * u(rng)),
                                 len, ehw);
  }
}

PointCloud sample_cloud(const ToolShape& tool, int n_points,
                        std::mt19937_64& rng) {
  auto dense = full_model_from_tool(tool, 1.2e-3).cloud;
  PointCloud out;
  out.frame = dense.frame;
  std::uniform_int_distribution<size_t> pick(0, dense.points.size() - 1);
  std::normal_distribution<double> jitter(0.0, 2e-4);
  for (int i = 0; i < n_points; ++i) {
    Eigen::Vector3d p = dense.points[pick(rng)];
    p.y() += jitter(rng);
    p.z() += jitter(rng);
    out.points.push_back(p);
  }
  return out;
}

}  // namespace

TrainReport pretrain_object_encoder(const TrainConfig& cfg, ObjectEncoder* enc) {
  constexpr int kFamilies = 4, kPerFamily = 120, kPoints = 128;
  std::mt19937_64 rng(cfg.seed ^ 0x0bceull);
  std::vector<PointCloud> clouds;
  std::vector<int> labels;
  for (int f = 0; f < kFamilies; ++f)
    for (int i = 0; i < kPerFamily; ++i) {
      clouds.push_back(sample_cloud(random_primitive(f, rng), kPoints, rng));
      labels.push_back(f);
    }

  nn::Sequential<float> classifier;
  {
    std::mt19937_64 init(cfg.seed ^ 0xc1a55ull);
    classifier.add<nn::Dense<float>>(64, kFamilies, init);
  }
  auto params = enc->point_mlp.params();
  for (auto* p : enc->post_pool.params()) params.push_back(p);
  for (auto* p : classifier.params()) params.push_back(p);
  nn::Adam<float> opt(params, cfg.lr, cfg.beta1, cfg.beta2);

  auto idx = shuffled_indices(clouds.size(), rng);
  size_t n_val = size_t(clouds.size() * cfg.val_fraction);
  size_t n_train = clouds.size() - n_val;

  auto batch_loss = [&](const std::vector<size_t>& rows, bool train) {
    std::vector<const PointCloud*> ptrs;
    for (size_t r : rows) ptrs.push_back(&clouds[r]);
    TrunkPass t = trunk_forward(*enc, ptrs, train);
    Tensor<float> logits = classifier.forward(t.feature, train);
    int n = t.n;
    double loss = 0.0;
    Tensor<float> glogits(logits.shape);
    for (int i = 0; i < n; ++i) {
      // Softmax cross-entropy, stabilized by the row max.
      float* row = &logits.d[size_t(i) * kFamilies];
      float mx = *std::max_element(row, row + kFamilies);
      double denom = 0.0;
      for (int k = 0; k < kFamilies; ++k) denom += std::exp(double(row[k] - mx));
      int y = labels[rows[i]];
      loss -= (double(row[y] - mx) - std::log(denom)) / n;
      for (int k = 0; k < kFamilies; ++k) {
        double p = std::exp(double(row[k] - mx)) / denom;
        glogits.d[size_t(i) * kFamilies + k] =
            float((p - (k == y ? 1.0 : 0.0)) / n);
      }
    }
    if (!train) return loss;
    enc->point_mlp.zero_grad();
    enc->post_pool.zero_grad();
    classifier.zero_grad();
    Tensor<float> gfeat = classifier.backward(glogits);
    trunk_backward(*enc, t, gfeat);
    opt.step();
    return loss;
  };

  auto train_batch = [&](const std::vector<size_t>& batch) {
    std::vector<size_t> rows;
    for (size_t b : batch) rows.push_back(idx[b]);
    return batch_loss(rows, true);
  };
  auto validate = [&] {
    double total = 0.0;
    size_t seen = 0;
    for (size_t b = n_train; b < idx.size(); b += cfg.batch_size) {
      size_t e = std::min(idx.size(), b + cfg.batch_size);
      std::vector<size_t> rows(idx.begin() + b, idx.begin() + e);
      total += batch_loss(rows, false) * rows.size();
      seen += rows.size();
    }
    return total / std::max<size_t>(1, seen);
  };

  TrainConfig pc = cfg;
  pc.epochs = std::min(cfg.epochs, 30);
  return run_epochs(pc, n_train, {&enc->point_mlp, &enc->post_pool}, train_batch,
                    validate, rng);
}

// ---- dynamics training ----

namespace {

struct DynSample {
  Eigen::VectorXd z, z_next;            // 15, from the frozen encoder
  Eigen::Matrix<double, 6, 1> w, r;     // scaled wrench, scaled pose
  Eigen::Vector4d a;                    // scaled action
  int object_id = 0;
  Eigen::Matrix<double, 6, 1> dw_t, dr_t;  // scaled targets
  size_t map_index = 0;                    // row into the next-map tensor
};

struct DynPrepared {
  std::vector<DynSample> samples;
  Tensor<float> next_maps;               // [N, 2, 25, 20], scaled
  std::vector<Eigen::VectorXd> trunk;    // per object, 64-dim frozen feature
  std::vector<size_t> train_idx, val_idx;
};

Eigen::Matrix<double, 6, 1> scale_pose(const Eigen::Matrix<double, 6, 1>& v) {
  Eigen::Matrix<double, 6, 1> s = v;
  s.head<3>() *= kPosScale;
  return s;
}

DynPrepared prepare_dynamics(const DynTrainData& d, const TrainConfig& cfg,
                             TactileAutoencoder& ae, ObjectEncoder& enc) {
  const Dataset& ds = *d.data;
  if (ds.size() < 8) throw TrainError("train_dynamics: too few transitions");
  DynPrepared out;
  std::vector<const DepthMapPair*> cur, nxt;
  for (const auto& t : ds.transitions) {
    cur.push_back(&t.s.tactile);
    nxt.push_back(&t.s_next.tactile);
  }
  out.next_maps = maps_to_tensor(nxt);
  // Batch-encode the current maps with the frozen encoder.
  Tensor<float> x = maps_to_tensor(cur);
  Tensor<float> z = ae.encoder.forward(x, false);
  Tensor<float> zn = ae.encoder.forward(out.next_maps, false);
  out.samples.resize(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    const Transition& t = ds.transitions[i];
    DynSample& s = out.samples[i];
    s.z.resize(kTactileEmbedDim);
    s.z_next.resize(kTactileEmbedDim);
    for (int k = 0; k < kTactileEmbedDim; ++k) {
      s.z[k] = z.d[i * kTactileEmbedDim + k];
      s.z_next[k] = zn.d[i * kTactileEmbedDim + k];
    }
    s.w = t.s.wrench.vec6() * kWrenchScale;
    s.r = scale_pose(t.s.grasp_pose.vec6());
    Eigen::Vector4d av = t.action.vec4();
    for (int k = 0; k < 4; ++k) s.a[k] = av[k] * kActScale[k];
    s.object_id = t.object_id;
    s.dw_t = (t.s_next.wrench.vec6() - t.s.wrench.vec6()) * kWrenchScale;
    PoseAA adv = robot_action_model(t.s.grasp_pose, t.action);
    s.dr_t = scale_pose(t.s_next.grasp_pose.vec6() - adv.vec6());
    s.map_index = i;
  }
  for (int oid = 0; oid < int(d.object_models.size()); ++oid)
    out.trunk.push_back(enc.trunk_feature(d.object_models[oid].cloud));

  std::mt19937_64 rng(cfg.seed ^ 0xd47aull);
  auto idx = shuffled_indices(ds.size(), rng);
  size_t n_val = std::max<size_t>(1, size_t(ds.size() * cfg.val_fraction));
  out.train_idx.assign(idx.begin(), idx.end() - n_val);
  out.val_idx.assign(idx.end() - n_val, idx.end());
  return out;
}

// Composite one-step loss shared by the learned and linear dynamics. The
// tactile term lives in decoded-map space; the decoder stays frozen and is
// used only to route gradients back to the embedding prediction.
struct DynLossResult {
  double loss = 0.0;
  Tensor<float> g_out;  // grad wrt the network output rows
  Tensor<float> g_emb;  // grad wrt the object-embedding input slice
};

DynLossResult dynamics_batch_loss(const DynPrepared& prep,
                                  const TrainConfig& cfg,
                                  TactileAutoencoder& ae,
                                  const std::vector<size_t>& rows,
                                  const Tensor<float>& out, int out_dim,
                                  bool want_grad) {
  int n = int(rows.size());
  bool has_pose = out_dim == kDynOutputDim;
  DynLossResult res;
  res.g_out = Tensor<float>({n, out_dim});

  // z' = z + dz, decoded and compared against the measured next map.
  Tensor<float> zp({n, kTactileEmbedDim});
  for (int i = 0; i < n; ++i) {
    const DynSample& s = prep.samples[rows[i]];
    for (int k = 0; k < kTactileEmbedDim; ++k)
      zp.d[size_t(i) * kTactileEmbedDim + k] =
          float(s.z[k]) + out.d[size_t(i) * out_dim + k];
  }
  Tensor<float> dec = ae.decoder.forward(zp, false);
  size_t per = dec.per_sample();
  Tensor<float> gdec(dec.shape);
  double tac = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* tgt = &prep.next_maps.d[prep.samples[rows[i]].map_index * per];
    float* pred = &dec.d[size_t(i) * per];
    float* g = &gdec.d[size_t(i) * per];
    double sc = 1.0 / (double(per) * n);
    for (size_t j = 0; j < per; ++j) {
      double df = double(pred[j]) - double(tgt[j]);
      tac += df * df * sc;
      g[j] = float(2.0 * df * sc * cfg.alpha1);
    }
  }
  res.loss += cfg.alpha1 * tac;

  double reg = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < kTactileEmbedDim; ++k) {
      double dz = out.d[size_t(i) * out_dim + k];
      reg += dz * dz / (kTactileEmbedDim * double(n));
    }
  res.loss += cfg.alpha2 * reg;

  // Embedding-consistency term; weight alpha3 is zero by default, so it must
  // contribute nothing to the loss or the gradients in that case.
  double cons = 0.0;
  if (cfg.alpha3 != 0.0) {
    for (int i = 0; i < n; ++i) {
      const DynSample& s = prep.samples[rows[i]];
      for (int k = 0; k < kTactileEmbedDim; ++k) {
        double df = double(zp.d[size_t(i) * kTactileEmbedDim + k]) - s.z_next[k];
        cons += df * df / (kTactileEmbedDim * double(n));
      }
    }
    res.loss += cfg.alpha3 * cons;
  }

  double wp = 0.0;
  for (int i = 0; i < n; ++i) {
    const DynSample& s = prep.samples[rows[i]];
    for (int k = 0; k < 6; ++k) {
      double dw = out.d[size_t(i) * out_dim + kTactileEmbedDim + k] - s.dw_t[k];
      wp += dw * dw / (6.0 * n);
      if (has_pose) {
        double dr = out.d[size_t(i) * out_dim + kTactileEmbedDim + 6 + k] - s.dr_t[k];
        wp += dr * dr / (6.0 * n);
      }
    }
  }
  res.loss += wp;

  if (!want_grad) return res;
  ae.decoder.zero_grad();
  Tensor<float> gz = ae.decoder.backward(gdec);
  for (int i = 0; i < n; ++i) {
    const DynSample& s = prep.samples[rows[i]];
    float* go = &res.g_out.d[size_t(i) * out_dim];
    for (int k = 0; k < kTactileEmbedDim; ++k) {
      go[k] = gz.d[size_t(i) * kTactileEmbedDim + k] +
              float(cfg.alpha2 * 2.0 * out.d[size_t(i) * out_dim + k] /
                    (kTactileEmbedDim * double(n)));
      if (cfg.alpha3 != 0.0)
        go[k] += float(cfg.alpha3 * 2.0 *
                       (double(zp.d[size_t(i) * kTactileEmbedDim + k]) - s.z_next[k]) /
                       (kTactileEmbedDim * double(n)));
    }
    for (int k = 0; k < 6; ++k) {
      go[kTactileEmbedDim + k] =
          float(2.0 * (out.d[size_t(i) * out_dim + kTactileEmbedDim + k] - s.dw_t[k]) /
                (6.0 * n));
      if (has_pose)
        go[kTactileEmbedDim + 6 + k] = float(
            2.0 *
            (out.d[size_t(i) * out_dim + kTactileEmbedDim + 6 + k] - s.dr_t[k]) /
            (6.0 * n));
    }
  }
  return res;
}

Tensor<float> build_dyn_input(const DynPrepared& prep,
                              const std::vector<size_t>& rows,
                              const Tensor<float>& obj_emb) {
  int n = int(rows.size());
  Tensor<float> in({n, kDynInputDim});
  for (int i = 0; i < n; ++i) {
    const DynSample& s = prep.samples[rows[i]];
    float* row = &in.d[size_t(i) * kDynInputDim];
    int o = 0;
    for (int k = 0; k < kTactileEmbedDim; ++k) row[o++] = float(s.z[k]);
    for (int k = 0; k < 6; ++k) row[o++] = float(s.w[k]);
    for (int k = 0; k < 6; ++k) row[o++] = float(s.r[k]);
    for (int k = 0; k < kObjectEmbedDim; ++k)
      row[o++] = obj_emb.d[size_t(i) * kObjectEmbedDim + k];
    for (int k = 0; k < 4; ++k) row[o++] = float(s.a[k]);
  }
  return in;
}

// Generic driver shared by the learned net and the linear baseline.
TrainReport train_dyn_generic(const DynTrainData& d, const TrainConfig& cfg,
                              TactileAutoencoder* ae, ObjectEncoder* enc,
                              nn::Sequential<float>* net, int out_dim,
                              bool bias_free = false) {
  DynPrepared prep = prepare_dynamics(d, cfg, *ae, *enc);
  std::mt19937_64 rng(cfg.seed ^ 0xd17full);

  auto params = net->params();
  for (auto* p : enc->head.params()) params.push_back(p);
  nn::Adam<float> opt(params, cfg.lr, cfg.beta1, cfg.beta2);

  auto batch_loss = [&](const std::vector<size_t>& rows, bool train) {
    int n = int(rows.size());
    Tensor<float> feat({n, 64});
    for (int i = 0; i < n; ++i) {
      const auto& f = prep.trunk[prep.samples[rows[i]].object_id];
      for (int k = 0; k < 64; ++k) feat.d[size_t(i) * 64 + k] = float(f[k]);
    }
    Tensor<float> emb = enc->head.forward(feat, train);
    Tensor<float> in = build_dyn_input(prep, rows, emb);
    Tensor<float> out = net->forward(in, train);
    DynLossResult r =
        dynamics_batch_loss(prep, cfg, *ae, rows, out, out_dim, train);
    if (!train) return r.loss;
    net->zero_grad();
    enc->head.zero_grad();
    Tensor<float> gin = net->backward(r.g_out);
    Tensor<float> gemb({n, kObjectEmbedDim});
    int off = kTactileEmbedDim + 12;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < kObjectEmbedDim; ++k)
        gemb.d[size_t(i) * kObjectEmbedDim + k] =
            gin.d[size_t(i) * kDynInputDim + off + k];
    enc->head.backward(gemb);
    if (bias_free)
      for (auto* p : net->params())
        if (p->name == "b") p->zero_grad();
    opt.step();
    return r.loss;
  };

  auto train_batch = [&](const std::vector<size_t>& batch) {
    std::vector<size_t> rows;
    for (size_t b : batch) rows.push_back(prep.train_idx[b]);
    return batch_loss(rows, true);
  };
  auto validate = [&] {
    double total = 0.0;
    size_t seen = 0;
    for (size_t b = 0; b < prep.val_idx.size(); b += cfg.batch_size) {
      size_t e = std::min(prep.val_idx.size(), b + cfg.batch_size);
      std::vector<size_t> rows(prep.val_idx.begin() + b,
                               prep.val_idx.begin() + e);
      total += batch_loss(rows, false) * rows.size();
      seen += rows.size();
    }
    return total / std::max<size_t>(1, seen);
  };

  return run_epochs(cfg, prep.train_idx.size(), {net, &enc->head}, train_batch,
                    validate, rng);
}

}  // namespace

TrainReport train_dynamics(const DynTrainData& d, const TrainConfig& cfg,
                           TactileAutoencoder* ae, ObjectEncoder* enc,
                           MembraneDynamicsNet* dyn) {
  return train_dyn_generic(d, cfg, ae, enc, &dyn->net, kDynOutputDim);
}

TrainReport train_linear_dynamics(const DynTrainData& d, const TrainConfig& cfg,
                                  TactileAutoencoder* ae, ObjectEncoder* enc,
                                  LinearDynamics* lin) {
  return train_dyn_generic(d, cfg, ae, enc, &lin->net, kTactileEmbedDim + 6,
                           /*bias_free=*/true);
}

TactileMseEval eval_dynamics_tactile_mse(const DynTrainData& d,
                                         const TrainConfig& cfg,
                                         TactileAutoencoder& ae,
                                         ObjectEncoder& enc,
                                         MembraneDynamicsNet& dyn) {
  DynPrepared prep = prepare_dynamics(d, cfg, ae, enc);
  TactileMseEval ev;
  size_t count = 0;
  for (size_t b = 0; b < prep.val_idx.size(); b += cfg.batch_size) {
    size_t e = std::min(prep.val_idx.size(), b + cfg.batch_size);
    std::vector<size_t> rows(prep.val_idx.begin() + b, prep.val_idx.begin() + e);
    int n = int(rows.size());
    Tensor<float> feat({n, 64});
    for (int i = 0; i < n; ++i) {
      const auto& f = prep.trunk[prep.samples[rows[i]].object_id];
      for (int k = 0; k < 64; ++k) feat.d[size_t(i) * 64 + k] = float(f[k]);
    }
    Tensor<float> emb = enc.head.forward(feat, false);
    Tensor<float> in = build_dyn_input(prep, rows, emb);
    Tensor<float> out = dyn.net.forward(in, false);

    Tensor<float> zp({n, kTactileEmbedDim}), z0({n, kTactileEmbedDim});
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < kTactileEmbedDim; ++k) {
        float z = float(prep.samples[rows[i]].z[k]);
        z0.d[size_t(i) * kTactileEmbedDim + k] = z;
        zp.d[size_t(i) * kTactileEmbedDim + k] =
            z + out.d[size_t(i) * kDynOutputDim + k];
      }
    Tensor<float> dec_model = ae.decoder.forward(zp, false);
    Tensor<float> dec_id = ae.decoder.forward(z0, false);
    size_t per = dec_model.per_sample();
    for (int i = 0; i < n; ++i) {
      const float* tgt = &prep.next_maps.d[prep.samples[rows[i]].map_index * per];
      for (size_t j = 0; j < per; ++j) {
        double dm = double(dec_model.d[size_t(i) * per + j]) - tgt[j];
        double di = double(dec_id.d[size_t(i) * per + j]) - tgt[j];
        ev.model_mse += dm * dm;
        ev.identity_mse += di * di;
      }
      ++count;
    }
  }
  double denom = double(count) * 2 * kPoolRows * kPoolCols;
  ev.model_mse /= denom;
  ev.identity_mse /= denom;
  return ev;
}

// ---- gradient checking ----

double gradient_check(nn::Sequential<double>& net, nn::Tensor<double> input,
                      uint64_t seed, int max_params) {
  std::mt19937_64 rng(seed ^ 0x9cadull);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-6;

  // Nudge the input until every ReLU pre-activation is clear of the kink,
  // otherwise finite differences straddle the non-smooth point.
  for (int tries = 0; tries < 10; ++tries) {
    net.forward(input, true);
    if (net.min_relu_margin() > 1e-4) break;
    for (auto& v : input.d) v += 1e-3 * u(rng);
  }

  nn::Tensor<double> y = net.forward(input, true);
  nn::Tensor<double> c(y.shape);
  for (auto& v : c.d) v = u(rng);
  auto functional = [&] {
    nn::Tensor<double> out = net.forward(input, true);
    double s = 0.0;
    for (size_t i = 0; i < out.d.size(); ++i) s += c.d[i] * out.d[i];
    return s;
  };

  net.zero_grad();
  net.forward(input, true);
  net.backward(c);

  double worst = 0.0;
  for (auto* p : net.params()) {
    size_t n = p->w.size();
    size_t stride = std::max<size_t>(1, n / size_t(max_params));
    std::uniform_int_distribution<size_t> off(0, stride - 1);
    for (size_t k = off(rng); k < n; k += stride) {
      double orig = p->w[k];
      p->w[k] = orig + h;
      double fp = functional();
      p->w[k] = orig - h;
      double fm = functional();
      p->w[k] = orig;
      double fd = (fp - fm) / (2 * h);
      double an = p->g[k];
      double diff = std::abs(an - fd);
      // Below the finite-difference noise floor both sides are numerically
      // zero (e.g. a pre-batchnorm bias); treat that as exact agreement.
      if (diff <= 1e-7) continue;
      double rel = diff / std::max(1e-6, std::abs(an) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// ---- checkpoints ----

namespace {

std::string param_path(const std::string& dir, const std::string& prefix,
                       size_t layer, const std::string& name) {
  return dir + "/" + prefix + "_" + std::to_string(layer) + "_" + name + ".btns";
}

void write_vec(const std::string& path, const std::vector<int>& shape,
               const std::vector<float>& v) {
  std::vector<uint32_t> dims;
  for (int s : shape) dims.push_back(uint32_t(s));
  if (dims.empty()) dims.push_back(uint32_t(v.size()));
  tensor_write(path, dims, v);
}

}  // namespace

void save_sequential(nn::Sequential<float>& net, const std::string& dir,
                     const std::string& prefix) {
  fs::create_directories(dir);
  auto layers = net.layers();
  for (size_t li = 0; li < layers.size(); ++li) {
    for (auto* p : layers[li]->params())
      write_vec(param_path(dir, prefix, li, p->name), p->shape, p->w);
    if (auto* bn = dynamic_cast<nn::BatchNorm<float>*>(layers[li])) {
      write_vec(param_path(dir, prefix, li, "rmean"), {}, bn->running_mean());
      write_vec(param_path(dir, prefix, li, "rvar"), {}, bn->running_var());
    }
  }
}

void load_sequential(nn::Sequential<float>& net, const std::string& dir,
                     const std::string& prefix) {
  auto layers = net.layers();
  for (size_t li = 0; li < layers.size(); ++li) {
    for (auto* p : layers[li]->params()) {
      TensorData t = tensor_read(param_path(dir, prefix, li, p->name));
      if (t.data.size() != p->w.size())
        throw TensorFormatError("checkpoint shape mismatch for " + p->name);
      p->w = t.data;
    }
    if (auto* bn = dynamic_cast<nn::BatchNorm<float>*>(layers[li])) {
      bn->running_mean() = tensor_read(param_path(dir, prefix, li, "rmean")).data;
      bn->running_var() = tensor_read(param_path(dir, prefix, li, "rvar")).data;
    }
  }
}

namespace {

void write_meta(const std::string& dir, const std::string& kind,
                const TrainConfig& cfg, const TrainReport& rep) {
  std::ofstream f(dir + "/meta.json");
  f << "{\n  \"kind\": \"" << kind << "\",\n  \"lr\": " << cfg.lr
    << ",\n  \"batch_size\": " << cfg.batch_size
    << ",\n  \"best_epoch\": " << rep.best_epoch
    << ",\n  \"best_val_loss\": " << rep.best_val_loss << "\n}\n";
}

}  // namespace

void save_autoencoder(TactileAutoencoder& ae, const std::string& dir,
                      const TrainConfig& cfg, const TrainReport& rep) {
  save_sequential(ae.encoder, dir, "enc");
  save_sequential(ae.decoder, dir, "dec");
  write_meta(dir, "autoencoder", cfg, rep);
}

void load_autoencoder(TactileAutoencoder& ae, const std::string& dir) {
  load_sequential(ae.encoder, dir, "enc");
  load_sequential(ae.decoder, dir, "dec");
}

void save_object_encoder(ObjectEncoder& enc, const std::string& dir) {
  save_sequential(enc.point_mlp, dir, "pmlp");
  save_sequential(enc.post_pool, dir, "pool");
  save_sequential(enc.head, dir, "head");
}

void load_object_encoder(ObjectEncoder& enc, const std::string& dir) {
  load_sequential(enc.point_mlp, dir, "pmlp");
  load_sequential(enc.post_pool, dir, "pool");
  load_sequential(enc.head, dir, "head");
}

void save_dynamics_net(MembraneDynamicsNet& dyn, const std::string& dir,
                       const std::string& kind, const TrainConfig& cfg,
                       const TrainReport& rep) {
  save_sequential(dyn.net, dir, "dyn");
  write_meta(dir, kind, cfg, rep);
}

void load_dynamics_net(MembraneDynamicsNet& dyn, const std::string& dir) {
  load_sequential(dyn.net, dir, "dyn");
}

}  // namespace bubbledyn
