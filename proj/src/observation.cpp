#include "bubbledyn/observation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>

namespace bubbledyn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ObjectModel model_from_tool(const ToolShape& tool, double spacing,
                            double window_y, double window_z) {
  ObjectModel m;
  m.name = tool.name;
  m.cloud.frame = "object";
  for (const auto& p : tool.area_samples(spacing))
    if (std::abs(p.x()) <= window_y && std::abs(p.y()) <= window_z)
      m.cloud.points.push_back({0.0, p.x(), p.y()});
  m.tip = {0.0, tool.tip.x(), tool.tip.y()};
  m.extent = tool.max_extent();
  return m;
}

ObjectModel full_model_from_tool(const ToolShape& tool, double spacing) {
  ObjectModel m;
  m.name = tool.name;
  m.cloud.frame = "object";
  for (const auto& p : tool.area_samples(spacing))
    m.cloud.points.push_back({0.0, p.x(), p.y()});
  m.tip = {0.0, tool.tip.x(), tool.tip.y()};
  m.extent = tool.max_extent();
  return m;
}

ObsStatus extract_imprint(const DepthMapPair& def, const CameraModel& left,
                          const CameraModel& right, Imprint* out) {
  out->points.clear();
  out->deformation.clear();
  const size_t total = def.size();
  // Deformation rank threshold: value of the top-10% pixel over the whole
  // membrane pair.
  std::vector<float> vals(def.data);
  size_t k = size_t(std::floor(total * kImprintTopFraction));
  if (k == 0) k = 1;
  std::nth_element(vals.begin(), vals.begin() + (k - 1), vals.end(),
                   std::greater<float>());
  float rank_thresh = vals[k - 1];
  float thresh = std::max(rank_thresh, float(kImprintMinDeform));

  // Surviving pixels per channel, then 4-connected pixel components.
  std::vector<ProjectedPoint> pts = depth_to_pointcloud(def, left, right);
  std::vector<int> label(total, -1);
  auto idx = [&](int ch, int r, int c) {
    return (size_t(ch) * def.rows + r) * def.cols + c;
  };
  int n_components = 0;
  std::vector<std::vector<size_t>> comps;
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < def.rows; ++r)
      for (int c = 0; c < def.cols; ++c) {
        size_t i = idx(ch, r, c);
        if (def.data[i] < thresh || label[i] >= 0) continue;
        comps.emplace_back();
        std::queue<std::pair<int, int>> q;
        q.push({r, c});
        label[i] = n_components;
        while (!q.empty()) {
          auto [cr, cc] = q.front();
          q.pop();
          comps.back().push_back(idx(ch, cr, cc));
          const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
          for (int d = 0; d < 4; ++d) {
            int nr = cr + dr[d], nc = cc + dc[d];
            if (nr < 0 || nr >= def.rows || nc < 0 || nc >= def.cols) continue;
            size_t ni = idx(ch, nr, nc);
            if (def.data[ni] >= thresh && label[ni] < 0) {
              label[ni] = n_components;
              q.push({nr, nc});
            }
          }
        }
        ++n_components;
      }
  if (comps.empty()) return ObsStatus::no_imprint;

  // Merge components whose grasp-plane (y, z) gap is within the cluster
  // radius; left/right jaws overlap in this projection.
  std::vector<int> parent(comps.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto yz = [&](size_t i) {
    return Eigen::Vector2d(pts[i].point.y(), pts[i].point.z());
  };
  const double rad2 = kImprintClusterRadius * kImprintClusterRadius;
  for (size_t a = 0; a < comps.size(); ++a)
    for (size_t b = a + 1; b < comps.size(); ++b) {
      if (find(int(a)) == find(int(b))) continue;
      bool close = false;
      // Subsampled pairwise gap check.
      size_t stride_a = std::max<size_t>(1, comps[a].size() / 64);
      size_t stride_b = std::max<size_t>(1, comps[b].size() / 64);
      for (size_t i = 0; i < comps[a].size() && !close; i += stride_a)
        for (size_t j = 0; j < comps[b].size() && !close; j += stride_b)
          if ((yz(comps[a][i]) - yz(comps[b][j])).squaredNorm() <= rad2)
            close = true;
      if (close) parent[find(int(a))] = find(int(b));
    }
  // Pick the cluster with highest total deformation.
  std::vector<double> cluster_sum(comps.size(), 0.0);
  for (size_t a = 0; a < comps.size(); ++a) {
    double s = 0.0;
    for (size_t i : comps[a]) s += def.data[i];
    cluster_sum[find(int(a))] += s;
  }
  int best = -1;
  double best_sum = -1.0;
  for (size_t a = 0; a < comps.size(); ++a)
    if (parent[a] == int(a) && cluster_sum[a] > best_sum) {
      best_sum = cluster_sum[a];
      best = int(a);
    }
  for (size_t a = 0; a < comps.size(); ++a) {
    if (find(int(a)) != best) continue;
    for (size_t i : comps[a]) {
      out->points.push_back(pts[i].point);
      out->deformation.push_back(def.data[i]);
    }
  }
  return out->points.empty() ? ObsStatus::no_imprint : ObsStatus::ok;
}

namespace {

// Orientation of the dominant spatial spread in the grasp plane.
double principal_axis_angle(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= double(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Eigen::Vector2d axis = es.eigenvectors().col(1);
  return std::atan2(axis.y(), axis.x());
}

double spread_ratio_ok(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= double(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= double(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return std::sqrt(std::max(0.0, es.eigenvalues()[0]));
}

std::vector<Eigen::Vector2d> subsample(const std::vector<Eigen::Vector2d>& pts,
                                       int max_n) {
  if (int(pts.size()) <= max_n) return pts;
  std::vector<Eigen::Vector2d> out;
  double stride = double(pts.size()) / max_n;
  for (int i = 0; i < max_n; ++i) out.push_back(pts[size_t(i * stride)]);
  return out;
}

struct IcpResult {
  Eigen::Vector2d t;
  double theta = 0.0;
  double mse = 1e30;
};

IcpResult run_icp(const std::vector<Eigen::Vector2d>& model,
                  const std::vector<Eigen::Vector2d>& imprint, double theta0,
                  const Eigen::Vector2d& t0, int iterations) {
  Eigen::Vector2d t = t0;
  double theta = theta0;
  IcpResult best;
  for (int it = 0; it < iterations; ++it) {
    double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d rot;
    rot << c, -s, s, c;
    // Symmetric correspondences: model -> nearest imprint point, and imprint
    // -> nearest model point. One-directional matching leaves rotational
    // slack because a dense imprint always offers a nearby match.
    std::vector<Eigen::Vector2d> proj(model.size());
    for (size_t i = 0; i < model.size(); ++i) proj[i] = rot * model[i] + t;
    std::vector<size_t> nn_mi(model.size());
    std::vector<size_t> nn_im(imprint.size());
    double mse = 0.0;
    for (size_t i = 0; i < model.size(); ++i) {
      double bd = 1e30;
      size_t bj = 0;
      for (size_t j = 0; j < imprint.size(); ++j) {
        double d = (imprint[j] - proj[i]).squaredNorm();
        if (d < bd) {
          bd = d;
          bj = j;
        }
      }
      nn_mi[i] = bj;
      mse += bd;
    }
    mse /= double(model.size());
    for (size_t j = 0; j < imprint.size(); ++j) {
      double bd = 1e30;
      size_t bi = 0;
      for (size_t i = 0; i < model.size(); ++i) {
        double d = (imprint[j] - proj[i]).squaredNorm();
        if (d < bd) {
          bd = d;
          bi = i;
        }
      }
      nn_im[j] = bi;
    }
    // Align on mutually-nearest pairs when there are enough of them; mutual
    // agreement weeds out the mismatched correspondences whose absorbed
    // residuals flatten the cost in rotation. Fall back to the symmetric
    // union far from convergence, where mutual pairs are scarce.
    std::vector<Eigen::Vector2d> src, dst;
    for (size_t i = 0; i < model.size(); ++i) {
      if (nn_im[nn_mi[i]] == i) {
        src.push_back(model[i]);
        dst.push_back(imprint[nn_mi[i]]);
      }
    }
    if (src.size() < 16) {
      src.clear();
      dst.clear();
      for (size_t i = 0; i < model.size(); ++i) {
        src.push_back(model[i]);
        dst.push_back(imprint[nn_mi[i]]);
      }
      for (size_t j = 0; j < imprint.size(); ++j) {
        src.push_back(model[nn_im[j]]);
        dst.push_back(imprint[j]);
      }
    }
    if (mse < best.mse) {
      best.mse = mse;
      best.t = t;
      best.theta = theta;
    }
    // Closed-form least-squares planar alignment for these correspondences.
    Eigen::Vector2d ms = Eigen::Vector2d::Zero(), ds = Eigen::Vector2d::Zero();
    for (size_t i = 0; i < src.size(); ++i) {
      ms += src[i];
      ds += dst[i];
    }
    ms /= double(src.size());
    ds /= double(dst.size());
    Eigen::Matrix2d cc = Eigen::Matrix2d::Zero();
    for (size_t i = 0; i < src.size(); ++i)
      cc += (dst[i] - ds) * (src[i] - ms).transpose();
    double new_theta = std::atan2(cc(1, 0) - cc(0, 1), cc(0, 0) + cc(1, 1));
    double nc = std::cos(new_theta), nsn = std::sin(new_theta);
    Eigen::Matrix2d nrot;
    nrot << nc, -nsn, nsn, nc;
    Eigen::Vector2d new_t = ds - nrot * ms;
    if (std::abs(wrap_angle(new_theta - theta)) < 1e-10 &&
        (new_t - t).norm() < 1e-12) {
      theta = new_theta;
      t = new_t;
      break;
    }
    theta = new_theta;
    t = new_t;
  }
  // Score the final iterate as well.
  double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  double mse = 0.0;
  for (const auto& m : model) {
    Eigen::Vector2d mp = rot * m + t;
    double bd = 1e30;
    for (const auto& ip : imprint) bd = std::min(bd, (ip - mp).squaredNorm());
    mse += bd;
  }
  mse /= double(model.size());
  if (mse < best.mse) {
    best.mse = mse;
    best.t = t;
    best.theta = theta;
  }
  return best;
}

}  // namespace

ObsStatus icp_fit(const Imprint& imprint, const ObjectModel& model,
                  const IcpConfig& cfg, std::mt19937_64& rng, PoseAA* out,
                  double* mse_out) {
  if (imprint.size() == 0) return ObsStatus::no_imprint;
  if (model.cloud.points.size() < 16) return ObsStatus::degenerate_imprint;

  std::vector<Eigen::Vector2d> ipts;
  ipts.reserve(imprint.size());
  for (const auto& p : imprint.points) ipts.push_back({p.y(), p.z()});
  if (ipts.size() < 3 || spread_ratio_ok(ipts) < 2e-4)
    return ObsStatus::degenerate_imprint;

  std::vector<Eigen::Vector2d> mpts;
  for (const auto& p : model.cloud.points) mpts.push_back({p.y(), p.z()});
  std::vector<Eigen::Vector2d> isub = subsample(ipts, cfg.max_imprint_points);
  std::vector<Eigen::Vector2d> msub = subsample(mpts, cfg.max_model_points);

  Eigen::Vector2d imean = Eigen::Vector2d::Zero();
  for (const auto& p : isub) imean += p;
  imean /= double(isub.size());

  double imprint_axis = principal_axis_angle(isub);
  double model_axis = principal_axis_angle(msub);
  std::uniform_real_distribution<double> cone(-cfg.init_cone_deg * kPi / 180.0,
                                              cfg.init_cone_deg * kPi / 180.0);
  double theta0 = wrap_angle(imprint_axis - model_axis + cone(rng));

  Eigen::Vector2d mmean = Eigen::Vector2d::Zero();
  for (const auto& p : msub) mmean += p;
  mmean /= double(msub.size());

  // The principal axis has a sign ambiguity, and nearest-neighbour descent
  // stalls in shallow angular minima, so restart around both hypotheses.
  std::vector<IcpResult> results;
  for (double hyp : {theta0, wrap_angle(theta0 + kPi)})
    for (double off : {-10.0 * kPi / 180.0, 0.0, 10.0 * kPi / 180.0}) {
      double th = wrap_angle(hyp + off);
      Eigen::Matrix2d rot;
      rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      Eigen::Vector2d t0 = imean - rot * mmean;
      results.push_back(run_icp(msub, isub, th, t0, cfg.iterations));
    }
  IcpResult best = results[0];
  for (const auto& r : results)
    if (r.mse < best.mse) best = r;
  // Angular refinement: descend again from small rotations of the incumbent,
  // which escapes the shallow minima the coarse restarts settle into.
  for (double dth : {-6.0, -3.0, -1.5, 1.5, 3.0, 6.0}) {
    IcpResult res = run_icp(msub, isub, best.theta + dth * kPi / 180.0, best.t,
                            std::max(4, cfg.iterations / 2));
    results.push_back(res);
    if (res.mse < best.mse) best = res;
  }
  // Near-symmetric tools fit a half-turn equally well; the grasped tool never
  // approaches one relative to the gripper, so when the flipped hypothesis
  // fits comparably, prefer the smaller rotation.
  for (const auto& r : results)
    if (r.mse <= 1.3 * best.mse &&
        std::abs(wrap_angle(r.theta - best.theta)) > kPi / 2.0 &&
        std::abs(wrap_angle(r.theta)) < std::abs(wrap_angle(best.theta)))
      best = r;
  *out = PoseAA::planar(best.t.x(), best.t.y(), best.theta);
  if (mse_out) *mse_out = best.mse;
  return ObsStatus::ok;
}

bool detect_contact(const Wrench6& w, const Eigen::Vector3d& env_normal,
                    double threshold) {
  return std::abs(w.force.dot(env_normal.normalized())) > threshold;
}

PoseAA project_to_contact_manifold(const PoseAA& q, const ObjectModel& model,
                                   const Plane& env) {
  double dmin = 1e30;
  for (const auto& p : model.cloud.points)
    dmin = std::min(dmin, env.signed_distance(pose_apply(q, p)));
  // Include the tip, which may lie outside the cropped cloud.
  dmin = std::min(dmin, env.signed_distance(pose_apply(q, model.tip)));
  PoseAA out = q;
  out.position -= dmin * env.normal.normalized();
  return out;
}

ObsStatus observe(const MembraneState& s, const ObjectModel& model,
                  const CameraModel& left, const CameraModel& right,
                  const ContactConfig& contact, const IcpConfig& icp,
                  std::mt19937_64& rng, TaskState* out) {
  const DepthMapPair* full = &s.tactile;
  DepthMapPair up;
  if (s.tactile.rows == kPoolRows) {
    up = upsample(s.tactile);
    full = &up;
  }
  Imprint imp;
  ObsStatus st = extract_imprint(*full, left, right, &imp);
  if (st != ObsStatus::ok) return st;
  PoseAA q;
  st = icp_fit(imp, model, icp, rng, &q);
  if (st != ObsStatus::ok) return st;
  // Environment plane expressed in the grasp frame via the grasp pose.
  PoseAA inv = pose_inverse(s.grasp_pose);
  Plane env_g;
  env_g.point = pose_apply(inv, contact.env_plane.point);
  env_g.normal = inv.rotation() * contact.env_plane.normal;
  if (detect_contact(s.wrench, env_g.normal, contact.wrench_threshold))
    q = project_to_contact_manifold(q, model, env_g);
  out->q = q;
  out->w = s.wrench;
  return ObsStatus::ok;
}

}  // namespace bubbledyn
