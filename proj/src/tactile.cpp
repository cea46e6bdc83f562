#include "bubbledyn/tactile.hpp"

#include <algorithm>
#include <cmath>

namespace bubbledyn {

DepthMapPair crop_raw(const DepthMapPair& raw) {
  if (raw.rows != kRawRows || raw.cols != kRawCols)
    throw ShapeError("crop_raw: expected 2x224x171 input");
  DepthMapPair out(kFullRows, kFullCols);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < kFullRows; ++r)
      for (int c = 0; c < kFullCols; ++c)
        out.at(ch, r, c) = raw.at(ch, r + kCropRowOffset, c + kCropColOffset);
  return out;
}

DepthMapPair deformation_map(const DepthMapPair& meas, const DepthMapPair& ref) {
  if (meas.rows != ref.rows || meas.cols != ref.cols)
    throw ShapeError("deformation_map: shape mismatch");
  DepthMapPair out(meas.rows, meas.cols);
  for (size_t i = 0; i < out.size(); ++i)
    out.data[i] = meas.data[i] - ref.data[i];
  return out;
}

DepthMapPair downsample(const DepthMapPair& m) {
  if (m.rows % kPoolFactor != 0 || m.cols % kPoolFactor != 0)
    throw ShapeError("downsample: dims not divisible by 7");
  int orows = m.rows / kPoolFactor, ocols = m.cols / kPoolFactor;
  DepthMapPair out(orows, ocols);
  const float inv = 1.0f / (kPoolFactor * kPoolFactor);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < orows; ++r)
      for (int c = 0; c < ocols; ++c) {
        float s = 0.f;
        for (int i = 0; i < kPoolFactor; ++i)
          for (int j = 0; j < kPoolFactor; ++j)
            s += m.at(ch, r * kPoolFactor + i, c * kPoolFactor + j);
        out.at(ch, r, c) = s * inv;
      }
  return out;
}

DepthMapPair upsample(const DepthMapPair& m) {
  if (m.rows != kPoolRows || m.cols != kPoolCols)
    throw ShapeError("upsample: expected 2x25x20 input");
  DepthMapPair out(kFullRows, kFullCols);
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < kFullRows; ++r) {
      double sr = (r + 0.5) / kPoolFactor - 0.5;
      int r0 = static_cast<int>(std::floor(sr));
      double fr = sr - r0;
      int r0c = clampi(r0, m.rows - 1), r1c = clampi(r0 + 1, m.rows - 1);
      for (int c = 0; c < kFullCols; ++c) {
        double sc = (c + 0.5) / kPoolFactor - 0.5;
        int c0 = static_cast<int>(std::floor(sc));
        double fc = sc - c0;
        int c0c = clampi(c0, m.cols - 1), c1c = clampi(c0 + 1, m.cols - 1);
        double v = (1 - fr) * ((1 - fc) * m.at(ch, r0c, c0c) +
                               fc * m.at(ch, r0c, c1c)) +
                   fr * ((1 - fc) * m.at(ch, r1c, c0c) +
                         fc * m.at(ch, r1c, c1c));
        out.at(ch, r, c) = static_cast<float>(v);
      }
    }
  return out;
}

CameraModel default_camera(int jaw, double pixel_pitch, double rest_offset) {
  CameraModel cam;
  cam.pixel_pitch = pixel_pitch;
  Eigen::Matrix3d r;
  if (jaw == 0) {
    // Left jaw: image rows -> grasp y, cols -> grasp z, looking along +x.
    r.col(0) = Eigen::Vector3d(0, 1, 0);
    r.col(1) = Eigen::Vector3d(0, 0, 1);
    r.col(2) = Eigen::Vector3d(1, 0, 0);
    cam.extrinsic.position = {-rest_offset, 0, 0};
    cam.axis = Eigen::Vector3d::UnitX();
  } else {
    // Right jaw: mirrored view looking along -x.
    r.col(0) = Eigen::Vector3d(0, -1, 0);
    r.col(1) = Eigen::Vector3d(0, 0, 1);
    r.col(2) = Eigen::Vector3d(-1, 0, 0);
    cam.extrinsic.position = {rest_offset, 0, 0};
    cam.axis = -Eigen::Vector3d::UnitX();
  }
  Eigen::AngleAxisd aa(r);
  cam.extrinsic.axis_angle = aa.axis() * aa.angle();
  return cam;
}

std::vector<ProjectedPoint> depth_to_pointcloud(const DepthMapPair& def,
                                                const CameraModel& left,
                                                const CameraModel& right) {
  std::vector<ProjectedPoint> out;
  out.reserve(def.size());
  const CameraModel* cams[2] = {&left, &right};
  for (int ch = 0; ch < 2; ++ch) {
    const CameraModel& cam = *cams[ch];
    Eigen::Matrix3d r = cam.extrinsic.rotation();
    for (int v = 0; v < def.rows; ++v)
      for (int u = 0; u < def.cols; ++u) {
        Eigen::Vector3d img((v + 0.5 - def.rows / 2.0) * cam.pixel_pitch,
                            (u + 0.5 - def.cols / 2.0) * cam.pixel_pitch, 0.0);
        Eigen::Vector3d rest = r * img + cam.extrinsic.position;
        float d = def.at(ch, v, u);
        ProjectedPoint p;
        p.point = rest - double(d) * cam.axis;
        p.deformation = d;
        p.channel = ch;
        p.row = v;
        p.col = u;
        out.push_back(p);
      }
  }
  return out;
}

}  // namespace bubbledyn
