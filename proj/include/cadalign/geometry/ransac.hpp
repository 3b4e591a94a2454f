#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cadalign/core/rng.hpp"
#include "cadalign/geometry/affine.hpp"

namespace cadalign {

struct RansacResult {
  Pose9 pose;
  std::vector<bool> inlier_mask;
  int inlier_count = 0;
  int trials_run = 0;
};

namespace detail {

inline int count_inliers(const Affine34& A, const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                         double thr, std::vector<bool>* mask) {
  const Mat3 M = A.leftCols<3>();
  const Vec3 b = A.col(3);
  const double thr2 = thr * thr;
  int n = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const bool in = (M * src[i] + b - dst[i]).squaredNorm() < thr2;
    if (mask) (*mask)[i] = in;
    n += in;
  }
  return n;
}

inline int adaptive_trial_bound(double confidence, double inlier_ratio, int sample_size, int cap) {
  if (inlier_ratio >= 1.0) return 0;
  const double w = std::pow(std::max(1e-9, inlier_ratio), sample_size);
  if (w <= 1e-12) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - w);
  if (!(n > 0)) return 0;
  if (n >= static_cast<double>(cap)) return cap;
  return static_cast<int>(std::ceil(n));
}

}  // namespace detail

// Robust 9-DoF alignment between canonical coordinates and camera-frame
// points. Each trial fits an exact affine on a 4-point minimal set (degenerate
// sets are silently resampled within the trial budget), scores correspondences
// by camera-space residual against inlier_threshold, and keeps the largest
// consensus. The winner is refit by least squares over its inliers and split
// into R, t, s. Adaptive termination: the loop ends early once the trial count
// reaches the standard confidence bound for the best inlier ratio seen, never
// exceeding params.num_trials.
inline RansacResult ransac_pose_9dof(const NOCSet& nocs, const PointCloud& points, const RansacParams& params,
                                     std::uint64_t seed) {
  params.validate();
  if (nocs.size() != points.size()) throw std::invalid_argument("ransac: nocs and points must be row-aligned");
  const int N = static_cast<int>(points.size());
  if (N < params.minimal_set_size) throw std::runtime_error("ransac: fewer correspondences than minimal set");

  // clamp NOCs to the canonical cube before solving
  std::vector<Vec3> src = nocs.coords;
  for (auto& p : src)
    for (int a = 0; a < 3; ++a) p[a] = std::min(0.5, std::max(-0.5, p[a]));
  const std::vector<Vec3>& dst = points.points;

  Rng rng(seed);
  std::vector<int> scratch;
  constexpr int kResampleLimit = 32;

  int best_count = -1;
  Affine34 best_A = Affine34::Zero();
  int trials = 0;
  int bound = params.num_trials;
  while (trials < bound) {
    ++trials;
    std::optional<Affine34> A;
    for (int attempt = 0; attempt < kResampleLimit && !A; ++attempt) {
      const auto idx = rng.sample_without_replacement(N, 4, &scratch);
      std::array<Vec3, 4> s4, d4;
      for (int i = 0; i < 4; ++i) {
        s4[i] = src[idx[i]];
        d4[i] = dst[idx[i]];
      }
      A = try_fit_affine_minimal(s4, d4);
      if (A && !(A->leftCols<3>().determinant() > 0)) A.reset();  // reflections resampled like degenerates
    }
    if (!A) continue;
    const int count = detail::count_inliers(*A, src, dst, params.inlier_threshold, nullptr);
    if (count > best_count) {
      best_count = count;
      best_A = *A;
      bound = std::min(params.num_trials,
                       std::max(trials, detail::adaptive_trial_bound(params.confidence,
                                                                     static_cast<double>(count) / N, 4,
                                                                     params.num_trials)));
    }
  }

  if (best_count < 4) throw std::runtime_error("no consensus");

  // refit on the consensus set, fall back to the minimal-set pose if the
  // least-squares fit degenerates
  std::vector<bool> mask(N, false);
  detail::count_inliers(best_A, src, dst, params.inlier_threshold, &mask);
  std::vector<int> inlier_idx;
  inlier_idx.reserve(best_count);
  for (int i = 0; i < N; ++i)
    if (mask[i]) inlier_idx.push_back(i);
  Affine34 refined = best_A;
  if (auto lsq = fit_affine_lsq(src, dst, inlier_idx); lsq && lsq->leftCols<3>().determinant() > 0) refined = *lsq;

  RansacResult out;
  out.pose = decompose_affine(refined);
  out.inlier_mask.assign(N, false);
  // final mask is consistent with the returned pose
  const Affine34 final_A = out.pose.as_affine();
  out.inlier_count = detail::count_inliers(final_A, src, dst, params.inlier_threshold, &out.inlier_mask);
  out.trials_run = trials;
  return out;
}

}  // namespace cadalign
