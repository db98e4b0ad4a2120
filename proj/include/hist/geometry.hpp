// SPDX-License-Identifier: Apache-2.0
//
// Camera model and spatially-augmented token construction. Ego frame is
// x-forward, y-left, z-up; camera frame is the usual pinhole convention
// (z along the optical axis, x right, y down).
#pragma once

#include <vector>

#include "hist/common.hpp"
#include "hist/rng.hpp"

namespace hist {

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int image_w = 0, image_h = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0))
      throw InvalidConfigError("intrinsics: focal lengths must be positive");
    if (!(cx >= 0 && cx < image_w) || !(cy >= 0 && cy < image_h))
      throw InvalidConfigError("intrinsics: principal point outside image");
  }
};

// Rigid transform from camera frame to ego frame: p_ego = R * p_cam + t.
struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const {
    double err = (rotation.transpose() * rotation - Mat3::Identity()).norm();
    if (!(err < 1e-9))
      throw InvalidConfigError("extrinsics: rotation is not orthonormal");
  }
};

struct DepthMap {
  MatXd values;  // meters, one entry per patch

  void validate() const {
    if (!values.allFinite() || (values.array() <= 0.0).any())
      throw InvalidInputError("depth map: values must be finite and > 0");
  }
};

// Per-patch feature grid, stored row-major as (rows*cols) x d_model.
struct PatchFeatures {
  int rows = 0, cols = 0;
  MatXd features;

  int d_model() const { return static_cast<int>(features.cols()); }
};

struct SpatialToken {
  VecXd feature;
  Vec3 position;  // ego frame, meters
  int view = 0, row = 0, col = 0;
};

inline Vec3 back_project(double u, double v, double depth,
                         const CameraIntrinsics& k) {
  if (!(depth > 0) || !std::isfinite(depth))
    throw InvalidInputError("back_project: depth must be finite and > 0");
  if (u < 0 || u >= k.image_w || v < 0 || v >= k.image_h)
    throw InvalidInputError("back_project: pixel outside image bounds");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

// Pinhole projection, the exact inverse of back_project on its domain.
inline Vec2 project(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0)) throw InvalidInputError("project: point behind camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

inline Vec3 to_ego_frame(const Vec3& p_cam, const Extrinsics& ext) {
  ext.validate();
  return ext.rotation * p_cam + ext.translation;
}

// Sinusoidal featurization of a 3D point: d/6 (sin, cos) pairs per axis,
// frequencies in geometric progression (base 2) from a 100 m max wavelength.
inline VecXd sinusoidal_features(const Vec3& p, int d) {
  if (d <= 0 || d % 6 != 0)
    throw InvalidConfigError("sinusoidal_features: d must be divisible by 6");
  const int bands = d / 6;
  const double max_wavelength = 100.0;
  VecXd out(d);
  int idx = 0;
  for (int axis = 0; axis < 3; ++axis) {
    double x = p[axis];
    for (int b = 0; b < bands; ++b) {
      double freq = 2.0 * kPi / max_wavelength * std::pow(2.0, b);
      out[idx++] = std::sin(freq * x);
      out[idx++] = std::cos(freq * x);
    }
  }
  return out;
}

// Learnable two-layer perceptron over the sinusoidal features. Output width
// equals the token feature width so encodings add directly onto patch
// features.
struct PositionEncoder {
  MatXd w1, w2;
  VecXd b1, b2;

  explicit PositionEncoder(int d = 0) { init(d); }

  void init(int d) {
    if (d == 0) return;
    if (d % 6 != 0)
      throw InvalidConfigError("PositionEncoder: d must be divisible by 6");
    w1 = MatXd::Zero(d, d);
    w2 = MatXd::Zero(d, d);
    b1 = VecXd::Zero(d);
    b2 = VecXd::Zero(d);
  }

  void randomize(Rng& rng, double scale = 0.1) {
    for (int i = 0; i < w1.rows(); ++i)
      for (int j = 0; j < w1.cols(); ++j) w1(i, j) = scale * rng.normal();
    for (int i = 0; i < w2.rows(); ++i)
      for (int j = 0; j < w2.cols(); ++j) w2(i, j) = scale * rng.normal();
  }

  int dim() const { return static_cast<int>(w1.rows()); }

  VecXd encode(const Vec3& p_ego) const {
    VecXd s = sinusoidal_features(p_ego, dim());
    VecXd h = (w1 * s + b1).array().tanh();
    return w2 * h + b2;
  }
};

// Pixel center of patch (row, col) on a rows x cols grid.
inline Vec2 patch_center(int row, int col, int rows, int cols,
                         const CameraIntrinsics& k) {
  return {(col + 0.5) * k.image_w / cols, (row + 0.5) * k.image_h / rows};
}

inline std::vector<SpatialToken> augment_tokens(const PatchFeatures& features,
                                                const DepthMap& depth,
                                                const CameraIntrinsics& k,
                                                const Extrinsics& ext,
                                                const PositionEncoder& enc,
                                                int view = 0) {
  if (depth.values.rows() != features.rows ||
      depth.values.cols() != features.cols)
    throw InvalidInputError("augment_tokens: feature/depth shape mismatch");
  depth.validate();
  k.validate();
  std::vector<SpatialToken> tokens;
  tokens.reserve(static_cast<size_t>(features.rows) * features.cols);
  for (int r = 0; r < features.rows; ++r) {
    for (int c = 0; c < features.cols; ++c) {
      Vec2 px = patch_center(r, c, features.rows, features.cols, k);
      Vec3 p_cam = back_project(px.x(), px.y(), depth.values(r, c), k);
      Vec3 p_ego = to_ego_frame(p_cam, ext);
      SpatialToken tok;
      tok.feature =
          features.features.row(r * features.cols + c).transpose() +
          enc.encode(p_ego);
      tok.position = p_ego;
      tok.view = view;
      tok.row = r;
      tok.col = c;
      tokens.push_back(std::move(tok));
    }
  }
  return tokens;
}

// Fixed multi-view camera rig (intrinsics + camera-to-ego extrinsics per
// view) shared by the scenario renderer and the policy's vision encoder.
struct CameraRig {
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<Extrinsics> extrinsics;
  int patch_rows = 0, patch_cols = 0;

  int n_views() const { return static_cast<int>(intrinsics.size()); }
};

}  // namespace hist
