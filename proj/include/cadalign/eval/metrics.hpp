#pragma once

#include <cmath>
#include <vector>

#include "cadalign/geometry/affine.hpp"

namespace cadalign::eval {

// Alignment correctness gates; class must additionally match. The scale gate
// reads the ratio per axis and takes the worst axis by default; the mean-axis
// reading is available as a documented toggle.
struct AlignmentThresholds {
  double translation_m = 0.20;
  double rotation_deg = 20.0;
  double scale_ratio = 0.20;
  bool scale_ratio_mean_over_axes = false;
};

// Rotation-symmetry handling for a category (identity by default; C2/C4 are
// yaw symmetries around the canonical up axis).
enum class SymmetryClass { None, C2, C4 };

inline std::vector<Mat3> symmetry_rotations(SymmetryClass sym) {
  std::vector<Mat3> rs = {Mat3::Identity()};
  const int n = sym == SymmetryClass::C2 ? 2 : sym == SymmetryClass::C4 ? 4 : 1;
  for (int i = 1; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    Mat3 R;
    R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    rs.push_back(R);
  }
  return rs;
}

// Rotation error in radians from the combined-error formula's trace form;
// the arccos argument is clamped as a numerical guard.
inline double rotation_error_rad(const Mat3& pred, const Mat3& gt, SymmetryClass sym = SymmetryClass::None) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& S : symmetry_rotations(sym)) {
    const double tr = (Mat3(pred * S) * gt.transpose()).trace();
    const double c = std::min(1.0, std::max(-1.0, (tr - 1.0) / 2.0));
    best = std::min(best, std::acos(c));
  }
  return best;
}

// Combined pose error: geodesic rotation term (radians) plus Euclidean
// translation distance plus the L1 deviation of the per-axis scale ratio
// from one.
inline double combined_pose_error(const Pose9& pred, const Pose9& gt, SymmetryClass sym = SymmetryClass::None) {
  const double rot = rotation_error_rad(pred.R, gt.R, sym);
  const double trans = (pred.t - gt.t).norm();
  const double scale = (pred.s.cwiseQuotient(gt.s) - Vec3::Ones()).cwiseAbs().sum();
  return rot + trans + scale;
}

inline bool alignment_correct(const Pose9& pred, const Pose9& gt, bool class_ok, const AlignmentThresholds& thr,
                              SymmetryClass sym = SymmetryClass::None) {
  if (!class_ok) return false;
  if ((pred.t - gt.t).norm() > thr.translation_m) return false;
  if (rotation_error_rad(pred.R, gt.R, sym) * 180.0 / M_PI > thr.rotation_deg) return false;
  const Vec3 ratio_err = (pred.s.cwiseQuotient(gt.s) - Vec3::Ones()).cwiseAbs();
  const double scale_err = thr.scale_ratio_mean_over_axes ? ratio_err.mean() : ratio_err.maxCoeff();
  return scale_err <= thr.scale_ratio;
}

// Scale-sample accuracy: min over the first n samples of |s_gt - s_i|.
inline double scale_error_topn(const std::vector<double>& samples, double s_gt, int n) {
  if (n < 1) throw std::invalid_argument("scale_error_topn: n must be >= 1");
  double best = std::numeric_limits<double>::infinity();
  const int limit = std::min<int>(n, samples.size());
  for (int i = 0; i < limit; ++i) best = std::min(best, std::abs(s_gt - samples[i]));
  return best;
}

struct MetricPoseErrors {
  double translation_cm = 0;
  double rotation_deg = 0;
  double scale_err = 0;  // mean over axes of |s_pred/s_gt - 1|
};

inline MetricPoseErrors metric_pose_errors(const Pose9& pred, const Pose9& gt,
                                           SymmetryClass sym = SymmetryClass::None) {
  MetricPoseErrors e;
  e.translation_cm = (pred.t - gt.t).norm() * 100.0;
  e.rotation_deg = rotation_error_rad(pred.R, gt.R, sym) * 180.0 / M_PI;
  e.scale_err = (pred.s.cwiseQuotient(gt.s) - Vec3::Ones()).cwiseAbs().mean();
  return e;
}

}  // namespace cadalign::eval
