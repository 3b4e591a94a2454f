#pragma once

#include <Eigen/Dense>

#include "cadalign/core/rng.hpp"
#include "cadalign/geometry/types.hpp"

namespace cadalign::testing {

inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Pose9 random_pose(Rng& rng, double t_range = 1.0, double s_lo = 0.5, double s_hi = 2.5) {
  Pose9 T;
  T.R = random_rotation(rng);
  T.t = Vec3(rng.uniform(-t_range, t_range), rng.uniform(-t_range, t_range), rng.uniform(-t_range, t_range));
  T.s = Vec3(rng.uniform(s_lo, s_hi), rng.uniform(s_lo, s_hi), rng.uniform(s_lo, s_hi));
  return T;
}

inline Vec3 random_noc(Rng& rng) {
  return Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
}

inline CameraIntrinsics test_intrinsics(int w = 64, int h = 48) {
  CameraIntrinsics K;
  K.width = w;
  K.height = h;
  K.fx = K.fy = h;  // ~53 degree vertical field of view
  K.cx = w / 2;
  K.cy = h / 2;
  return K;
}

}  // namespace cadalign::testing
