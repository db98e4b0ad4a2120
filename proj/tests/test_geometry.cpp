// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hist/geometry.hpp"
#include "hist/scenario.hpp"

using namespace hist;

namespace {

CameraIntrinsics test_intrinsics() {
  CameraIntrinsics k;
  k.fx = 500.0;
  k.fy = 480.0;
  k.cx = 320.0;
  k.cy = 240.0;
  k.image_w = 640;
  k.image_h = 480;
  return k;
}

}  // namespace

TEST_CASE("project is the exact inverse of back_project") {
  CameraIntrinsics k = test_intrinsics();
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(0.0, k.image_w - 1e-6);
    double v = rng.uniform(0.0, k.image_h - 1e-6);
    double depth = rng.uniform(0.1, 80.0);
    Vec3 p = back_project(u, v, depth, k);
    Vec2 uv = project(p, k);
    CHECK(std::abs(uv.x() - u) < 1e-9);
    CHECK(std::abs(uv.y() - v) < 1e-9);
    CHECK(std::abs(p.z() - depth) < 1e-12);
  }
}

TEST_CASE("back_project rejects bad inputs") {
  CameraIntrinsics k = test_intrinsics();
  CHECK_THROWS_AS(back_project(10, 10, 0.0, k), InvalidInputError);
  CHECK_THROWS_AS(back_project(10, 10, -2.0, k), InvalidInputError);
  CHECK_THROWS_AS(back_project(-1, 10, 5.0, k), InvalidInputError);
  CHECK_THROWS_AS(back_project(10, 480, 5.0, k), InvalidInputError);
  CHECK_THROWS_AS(project(Vec3(1, 1, 0), k), InvalidInputError);
  CHECK_THROWS_AS(project(Vec3(1, 1, -3), k), InvalidInputError);
}

TEST_CASE("principal-point ray maps to the optical axis") {
  CameraIntrinsics k = test_intrinsics();
  Vec3 p = back_project(k.cx, k.cy, 12.5, k);
  CHECK(p.x() == doctest::Approx(0.0));
  CHECK(p.y() == doctest::Approx(0.0));
  CHECK(p.z() == doctest::Approx(12.5));
}

TEST_CASE("to_ego_frame applies the rigid transform") {
  Extrinsics ext;
  // 90 degree yaw: camera x maps to ego -y... use an explicit known matrix.
  ext.rotation << 0, 0, 1, -1, 0, 0, 0, -1, 0;  // z_cam->x_ego convention
  ext.translation = Vec3(0.5, 0.0, 1.6);
  Vec3 p_cam(1.0, 2.0, 3.0);
  Vec3 p = to_ego_frame(p_cam, ext);
  CHECK(p.x() == doctest::Approx(3.0 + 0.5));
  CHECK(p.y() == doctest::Approx(-1.0));
  CHECK(p.z() == doctest::Approx(-2.0 + 1.6));

  Extrinsics bad;
  bad.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(to_ego_frame(p_cam, bad), InvalidConfigError);
}

TEST_CASE("sinusoidal features: shape, range and axis structure") {
  VecXd f = sinusoidal_features(Vec3(3.0, -7.0, 2.0), 36);
  CHECK(f.size() == 36);
  CHECK((f.array().abs() <= 1.0 + 1e-12).all());
  // Zero point: every sin is 0, every cos is 1.
  VecXd z = sinusoidal_features(Vec3::Zero(), 36);
  for (int i = 0; i < 36; i += 2) {
    CHECK(z[i] == doctest::Approx(0.0));
    CHECK(z[i + 1] == doctest::Approx(1.0));
  }
  // First band has the 100 m wavelength.
  double w0 = 2.0 * kPi / 100.0;
  CHECK(f[0] == doctest::Approx(std::sin(w0 * 3.0)));
  CHECK(f[1] == doctest::Approx(std::cos(w0 * 3.0)));
  CHECK_THROWS_AS(sinusoidal_features(Vec3::Zero(), 16), InvalidConfigError);
}

TEST_CASE("patch centers tile the image uniformly") {
  CameraIntrinsics k = test_intrinsics();
  Vec2 c00 = patch_center(0, 0, 4, 4, k);
  CHECK(c00.x() == doctest::Approx(640.0 / 8.0));
  CHECK(c00.y() == doctest::Approx(480.0 / 8.0));
  Vec2 c33 = patch_center(3, 3, 4, 4, k);
  CHECK(c33.x() == doctest::Approx(640.0 * 7.0 / 8.0));
  CHECK(c33.y() == doctest::Approx(480.0 * 7.0 / 8.0));
}

TEST_CASE("augment_tokens back-projects every patch and adds the encoding") {
  CameraIntrinsics k = test_intrinsics();
  Extrinsics ext;  // identity: ego frame equals camera frame
  PatchFeatures pf;
  pf.rows = 2;
  pf.cols = 2;
  pf.features = MatXd::Zero(4, 12);
  DepthMap dm;
  dm.values = MatXd::Constant(2, 2, 10.0);
  PositionEncoder enc(12);  // zero-initialized: encode() returns zeros
  auto toks = augment_tokens(pf, dm, k, ext, enc, 3);
  REQUIRE(toks.size() == 4);
  for (const auto& t : toks) {
    CHECK(t.view == 3);
    CHECK(t.position.z() == doctest::Approx(10.0));
    CHECK(t.feature.norm() == doctest::Approx(0.0));
  }
  // Positions match manual back-projection of the patch centers.
  Vec2 px = patch_center(0, 1, 2, 2, k);
  Vec3 expect = back_project(px.x(), px.y(), 10.0, k);
  CHECK((toks[1].position - expect).norm() < 1e-12);

  DepthMap bad;
  bad.values = MatXd::Constant(3, 2, 1.0);
  CHECK_THROWS_AS(augment_tokens(pf, bad, k, ext, enc), InvalidInputError);
}

TEST_CASE("default rig is orthonormal and covers three views") {
  CameraRig rig = make_default_rig(4, 4);
  REQUIRE(rig.n_views() == 3);
  for (const auto& e : rig.extrinsics) e.validate();
  for (const auto& k : rig.intrinsics) k.validate();
  // Forward camera: optical axis is ego +x.
  Vec3 fwd = rig.extrinsics[0].rotation * Vec3(0, 0, 1);
  CHECK(fwd.x() == doctest::Approx(1.0));
  CHECK(std::abs(fwd.y()) < 1e-12);
}
