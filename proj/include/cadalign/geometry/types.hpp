#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "cadalign/core/image.hpp"

namespace cadalign {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole camera. Pixel (u, v) with depth z back-projects to
// ((u - cx) z / fx, (v - cy) z / fy, z); v grows downward.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
      throw std::invalid_argument("intrinsics: principal point outside image");
  }
};

// Camera-frame metric points; pixel_index[i] = v * width + u of the source
// pixel when the cloud came from a depth map, -1 otherwise.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> pixel_index;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Canonical coordinates in [-0.5, 0.5]^3, row-aligned with a PointCloud.
struct NOCSet {
  std::vector<Vec3> coords;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }

  // Clamps to the canonical cube. Diffusion samples can step slightly
  // outside; clamping keeps the pose solver's domain well-defined.
  static NOCSet from_clamped(std::vector<Vec3> raw) {
    for (auto& p : raw)
      for (int a = 0; a < 3; ++a) p[a] = std::min(0.5, std::max(-0.5, p[a]));
    return NOCSet{std::move(raw)};
  }

  bool in_canonical_cube(double tol = 0.0) const {
    for (const auto& p : coords)
      for (int a = 0; a < 3; ++a)
        if (p[a] < -0.5 - tol || p[a] > 0.5 + tol) return false;
    return true;
  }
};

// 9-DoF transform from canonical object space to metric camera space:
// x -> R * diag(s) * x + t. Scale acts along the canonical axes.
struct Pose9 {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 s = Vec3::Ones();

  Eigen::Matrix<double, 3, 4> as_affine() const {
    Eigen::Matrix<double, 3, 4> A;
    A.leftCols<3>() = R * s.asDiagonal();
    A.col(3) = t;
    return A;
  }

  Vec3 apply(const Vec3& x) const { return R * (s.asDiagonal() * x) + t; }

  // Inverse as a general affine: the inverse of R*diag(s) is diag(1/s)*R^T,
  // which is not itself of the form R'*diag(s') unless s is isotropic.
  Eigen::Matrix<double, 3, 4> inverse_affine() const {
    Eigen::Matrix<double, 3, 4> A;
    Mat3 Minv = s.cwiseInverse().asDiagonal() * R.transpose();
    A.leftCols<3>() = Minv;
    A.col(3) = -Minv * t;
    return A;
  }

  void validate(double tol = 1e-9) const {
    if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("pose: R not orthonormal");
    if (std::abs(R.determinant() - 1.0) > tol) throw std::invalid_argument("pose: det(R) != +1");
    if (!(s.array() > 0).all()) throw std::invalid_argument("pose: scale must be positive");
  }
};

struct RansacParams {
  double confidence = 0.999;       // adaptive-termination confidence
  double inlier_threshold = 0.005; // meters, camera-space residual
  int num_trials = 2000;           // trial budget
  int minimal_set_size = 4;

  void validate() const {
    if (!(confidence > 0 && confidence < 1)) throw std::invalid_argument("ransac: confidence must be in (0,1)");
    if (inlier_threshold <= 0) throw std::invalid_argument("ransac: inlier threshold must be positive");
    if (minimal_set_size < 4) throw std::invalid_argument("ransac: minimal set size must be >= 4");
    if (num_trials < 1) throw std::invalid_argument("ransac: trial budget must be >= 1");
  }
};

}  // namespace cadalign
