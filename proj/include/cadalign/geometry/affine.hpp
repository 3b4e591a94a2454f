#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cadalign/geometry/types.hpp"

namespace cadalign {

using Affine34 = Eigen::Matrix<double, 3, 4>;

inline Vec3 apply_affine(const Affine34& A, const Vec3& x) { return A.leftCols<3>() * x + A.col(3); }

// Applies a 9-DoF pose rowwise: R * diag(s) * x + t.
inline std::vector<Vec3> apply_pose(const Pose9& T, const std::vector<Vec3>& xs) {
  std::vector<Vec3> out;
  out.reserve(xs.size());
  const Mat3 M = T.R * T.s.asDiagonal();
  for (const auto& x : xs) out.push_back(M * x + T.t);
  return out;
}

inline Affine34 compose(const Mat3& R, const Vec3& t, const Vec3& s) {
  Affine34 A;
  A.leftCols<3>() = R * s.asDiagonal();
  A.col(3) = t;
  return A;
}

// Exact affine through four point pairs; nullopt on (near-)coplanar sets so
// the caller can resample.
inline std::optional<Affine34> try_fit_affine_minimal(const std::array<Vec3, 4>& src, const std::array<Vec3, 4>& dst) {
  Eigen::Matrix4d M;
  for (int i = 0; i < 4; ++i) {
    M.row(i) << src[i].x(), src[i].y(), src[i].z(), 1.0;
  }
  // scale-aware degeneracy guard on the simplex volume
  const double span = (M.topLeftCorner<4, 3>().colwise().maxCoeff() - M.topLeftCorner<4, 3>().colwise().minCoeff()).maxCoeff();
  const double det = M.determinant();
  if (std::abs(det) < 1e-9 * std::max(1.0, span * span * span)) return std::nullopt;
  Eigen::PartialPivLU<Eigen::Matrix4d> lu(M);
  Eigen::Matrix<double, 4, 3> rhs;
  for (int i = 0; i < 4; ++i) rhs.row(i) = dst[i].transpose();
  Eigen::Matrix<double, 4, 3> theta = lu.solve(rhs);  // rows: A^T ; b^T
  Affine34 A;
  A.leftCols<3>() = theta.topRows<3>().transpose();
  A.col(3) = theta.row(3).transpose();
  return A;
}

inline Affine34 fit_affine_minimal(const std::array<Vec3, 4>& src, const std::array<Vec3, 4>& dst) {
  auto A = try_fit_affine_minimal(src, dst);
  if (!A) throw std::runtime_error("degenerate minimal set");
  return *A;
}

// Least-squares affine over all correspondences (used for the consensus
// refit). Requires at least 4 pairs.
inline std::optional<Affine34> fit_affine_lsq(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                                              const std::vector<int>& idx) {
  if (idx.size() < 4) return std::nullopt;
  Eigen::MatrixXd X(idx.size(), 4);
  Eigen::MatrixXd Y(idx.size(), 3);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Vec3& p = src[idx[r]];
    X.row(r) << p.x(), p.y(), p.z(), 1.0;
    Y.row(r) = dst[idx[r]].transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 4) return std::nullopt;
  Eigen::Matrix<double, 4, 3> theta = qr.solve(Y);
  Affine34 A;
  A.leftCols<3>() = theta.topRows<3>().transpose();
  A.col(3) = theta.row(3).transpose();
  return A;
}

// Splits an affine into rotation, translation and per-axis scale.
// R is the polar factor of the linear part; s_j is the norm of column j of
// R^T M, so compose(R, t, s) reproduces A whenever A's linear part is of the
// form R * diag(s).
inline Pose9 decompose_affine(const Affine34& A) {
  const Mat3 M = A.leftCols<3>();
  const double det = M.determinant();
  if (!(det > 0)) throw std::runtime_error("reflection or singular linear part");
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    // det(M) > 0 makes this unreachable in exact arithmetic; guard anyway.
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    R = U * svd.matrixV().transpose();
  }
  const Mat3 P = R.transpose() * M;
  Pose9 T;
  T.R = R;
  T.t = A.col(3);
  T.s = Vec3(P.col(0).norm(), P.col(1).norm(), P.col(2).norm());
  return T;
}

// Geodesic rotation distance in radians. Quaternion + atan2 form, which
// stays accurate for angles far below the acos((tr-1)/2) resolution floor.
inline double rotation_angle(const Mat3& Ra, const Mat3& Rb) {
  const Eigen::Quaterniond q(Mat3(Ra * Rb.transpose()));
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

}  // namespace cadalign
