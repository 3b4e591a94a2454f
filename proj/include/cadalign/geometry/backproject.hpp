#pragma once

#include <stdexcept>

#include "cadalign/core/rng.hpp"
#include "cadalign/geometry/types.hpp"

namespace cadalign {

// Lifts masked depth pixels to camera-frame points through the pinhole model.
// One point per pixel with mask != 0 and depth > 0; an empty mask yields an
// empty cloud.
inline PointCloud backproject(const DepthMap& depth, const InstanceMask& mask, const CameraIntrinsics& K,
                              std::uint16_t instance_id) {
  K.validate();
  if (depth.width() != K.width || depth.height() != K.height || depth.channels() != 1)
    throw std::invalid_argument("backproject: depth dimensions do not match intrinsics");
  if (mask.width() != depth.width() || mask.height() != depth.height())
    throw std::invalid_argument("backproject: mask dimensions do not match depth");
  PointCloud pc;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (mask.at(u, v) != instance_id) continue;
      const double z = depth.at(u, v);
      if (!(z > 0.0)) continue;
      pc.points.emplace_back((u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z);
      pc.pixel_index.push_back(v * depth.width() + u);
    }
  }
  return pc;
}

// Back-projects every pixel with a valid mask id (any object).
inline PointCloud backproject_any(const DepthMap& depth, const InstanceMask& mask, const CameraIntrinsics& K) {
  K.validate();
  if (depth.width() != K.width || depth.height() != K.height)
    throw std::invalid_argument("backproject: depth dimensions do not match intrinsics");
  PointCloud pc;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      if (mask.at(u, v) == 0) continue;
      const double z = depth.at(u, v);
      if (!(z > 0.0)) continue;
      pc.points.emplace_back((u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z);
      pc.pixel_index.push_back(v * depth.width() + u);
    }
  return pc;
}

// Projects a camera-frame point to pixel coordinates (u, v).
inline Eigen::Vector2d project(const Vec3& p, const CameraIntrinsics& K) {
  if (!(p.z() > 0)) throw std::invalid_argument("project: point behind camera");
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

// Uniform subset without replacement when the cloud is large enough,
// with replacement otherwise. Deterministic given the seed.
inline PointCloud subsample_points(const PointCloud& pc, int n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("subsample_points: n must be positive");
  if (pc.empty()) throw std::runtime_error("empty object observation");
  Rng rng(seed);
  const int N = static_cast<int>(pc.size());
  PointCloud out;
  out.points.reserve(n);
  out.pixel_index.reserve(n);
  const bool has_px = !pc.pixel_index.empty();
  auto push = [&](int i) {
    out.points.push_back(pc.points[i]);
    out.pixel_index.push_back(has_px ? pc.pixel_index[i] : -1);
  };
  if (N >= n) {
    for (int i : rng.sample_without_replacement(N, n)) push(i);
  } else {
    for (int i = 0; i < n; ++i) push(static_cast<int>(rng.uniform_index(N)));
  }
  return out;
}

}  // namespace cadalign
