#include <random>

#include "bubbledyn/tactile.hpp"
#include "doctest.h"

using namespace bubbledyn;

namespace {

DepthMapPair random_map(int rows, int cols, uint64_t seed) {
  DepthMapPair m(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.01f, 0.01f);
  for (auto& v : m.data) v = u(rng);
  return m;
}

}  // namespace

TEST_CASE("shape chain 224x171 -> 175x140 -> 25x20 -> 175x140") {
  DepthMapPair raw = random_map(kRawRows, kRawCols, 1);
  DepthMapPair full = crop_raw(raw);
  CHECK(full.rows == kFullRows);
  CHECK(full.cols == kFullCols);
  DepthMapPair pooled = downsample(full);
  CHECK(pooled.rows == kPoolRows);
  CHECK(pooled.cols == kPoolCols);
  DepthMapPair up = upsample(pooled);
  CHECK(up.rows == kFullRows);
  CHECK(up.cols == kFullCols);

  // The crop is the fixed centered window.
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < kFullRows; r += 17)
      for (int c = 0; c < kFullCols; c += 13)
        CHECK(full.at(ch, r, c) ==
              raw.at(ch, r + kCropRowOffset, c + kCropColOffset));

  CHECK_THROWS_AS(crop_raw(random_map(10, 10, 2)), ShapeError);
  CHECK_THROWS_AS(downsample(random_map(10, 10, 2)), ShapeError);
  CHECK_THROWS_AS(upsample(random_map(10, 10, 2)), ShapeError);
}

TEST_CASE("pooling equals the brute-force 7x7 block mean") {
  DepthMapPair full = random_map(kFullRows, kFullCols, 3);
  DepthMapPair pooled = downsample(full);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < kPoolRows; ++r)
      for (int c = 0; c < kPoolCols; ++c) {
        double acc = 0.0;
        for (int i = 0; i < kPoolFactor; ++i)
          for (int j = 0; j < kPoolFactor; ++j)
            acc += full.at(ch, r * kPoolFactor + i, c * kPoolFactor + j);
        CHECK(pooled.at(ch, r, c) ==
              doctest::Approx(acc / (kPoolFactor * kPoolFactor)).epsilon(1e-6));
      }
}

TEST_CASE("pooling and upsampling are linear and preserve constants") {
  DepthMapPair a = random_map(kFullRows, kFullCols, 4);
  DepthMapPair b = random_map(kFullRows, kFullCols, 5);
  DepthMapPair sum(kFullRows, kFullCols);
  for (size_t i = 0; i < sum.data.size(); ++i)
    sum.data[i] = 2.0f * a.data[i] + 3.0f * b.data[i];
  DepthMapPair pa = downsample(a), pb = downsample(b), ps = downsample(sum);
  for (size_t i = 0; i < ps.data.size(); ++i)
    CHECK(ps.data[i] ==
          doctest::Approx(2.0f * pa.data[i] + 3.0f * pb.data[i]).epsilon(1e-6));

  DepthMapPair ua = upsample(pa), ub = upsample(pb), us = upsample(ps);
  for (size_t i = 0; i < us.data.size(); ++i)
    CHECK(us.data[i] ==
          doctest::Approx(2.0f * ua.data[i] + 3.0f * ub.data[i]).epsilon(1e-6));

  DepthMapPair cst(kFullRows, kFullCols);
  for (auto& v : cst.data) v = 0.0042f;
  DepthMapPair pc = downsample(cst);
  for (float v : pc.data) CHECK(v == doctest::Approx(0.0042f).epsilon(1e-6));
  DepthMapPair uc = upsample(pc);
  for (float v : uc.data) CHECK(v == doctest::Approx(0.0042f).epsilon(1e-6));
}

TEST_CASE("upsample interpolates the pooled values at block centers") {
  // With cell-center alignment, full-res pixel 7r + 3 maps to pooled
  // coordinate r exactly, so block centers reproduce the pooled value.
  DepthMapPair pooled = random_map(kPoolRows, kPoolCols, 6);
  DepthMapPair up = upsample(pooled);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < kPoolRows; ++r)
      for (int c = 0; c < kPoolCols; ++c)
        CHECK(up.at(ch, 7 * r + 3, 7 * c + 3) ==
              doctest::Approx(pooled.at(ch, r, c)).epsilon(1e-6));
}

TEST_CASE("deformation map is meas minus ref") {
  DepthMapPair meas = random_map(kFullRows, kFullCols, 7);
  DepthMapPair ref = random_map(kFullRows, kFullCols, 8);
  DepthMapPair def = deformation_map(meas, ref);
  for (size_t i = 0; i < def.data.size(); ++i)
    CHECK(def.data[i] == doctest::Approx(meas.data[i] - ref.data[i]));
  CHECK_THROWS_AS(deformation_map(meas, random_map(10, 10, 9)), ShapeError);
}

TEST_CASE("camera projection places deformed pixels between the jaws") {
  double pitch = 2e-4, rest = 0.012;
  CameraModel left = default_camera(0, pitch, rest);
  CameraModel right = default_camera(1, pitch, rest);
  DepthMapPair def(kFullRows, kFullCols);
  int r0 = 80, c0 = 60;
  def.at(0, r0, c0) = 0.004f;  // left membrane pushed 4 mm toward its camera
  def.at(1, r0, c0) = 0.004f;

  auto pts = depth_to_pointcloud(def, left, right);
  REQUIRE(pts.size() == 2u * kFullRows * kFullCols);
  for (const auto& p : pts) {
    if (p.row != r0 || p.col != c0) continue;
    if (p.channel == 0) {
      // Left rest plane at x = -rest; deformation bulges toward the camera.
      CHECK(p.point.x() == doctest::Approx(-rest - 0.004).epsilon(1e-9));
    } else {
      CHECK(p.point.x() == doctest::Approx(rest + 0.004).epsilon(1e-9));
    }
    CHECK(std::abs(p.point.y()) < kFullRows * pitch);
    CHECK(std::abs(p.point.z()) < kFullCols * pitch);
    CHECK(p.deformation == 0.004f);
  }

  // Left/right undeformed pixels sit mirrored about the grasp plane.
  const auto& l = pts[size_t(10) * kFullCols + 20];
  const auto& r = pts[size_t(kFullRows + 10) * kFullCols + 20];
  CHECK(l.channel == 0);
  CHECK(r.channel == 1);
  CHECK(l.point.x() == doctest::Approx(-r.point.x()));
  // Right camera row axis is mirrored: same pixel maps to negated y.
  CHECK(l.point.y() == doctest::Approx(-r.point.y()).epsilon(1e-9));
  CHECK(l.point.z() == doctest::Approx(r.point.z()).epsilon(1e-9));
}
