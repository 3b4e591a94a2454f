#pragma once


#include <json.hpp>
#include <memory>

#include "cadalign/geometry/types.hpp"
#include "cadalign/nn/layers.hpp"

namespace cadalign::models {

using nn::Mat;
using nn::Node;
using nn::Tape;

// Brute-force k-nearest-neighbor table (row indices), local to one cloud.
// Uniform scaling of the cloud leaves the table unchanged.
inline std::shared_ptr<Eigen::MatrixXi> knn_indices(const Mat& pts, int k) {
  const long N = pts.rows();
  auto idx = std::make_shared<Eigen::MatrixXi>(N, k);
  std::vector<std::pair<float, int>> dist(N);
  for (long i = 0; i < N; ++i) {
    for (long j = 0; j < N; ++j)
      dist[j] = {(pts.row(i) - pts.row(j)).squaredNorm(), static_cast<int>(j)};
    dist[i].first = std::numeric_limits<float>::infinity();  // exclude self
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (int j = 0; j < k; ++j) (*idx)(i, j) = dist[j].second;
  }
  return idx;
}

// Per-point condition features for the alignment diffusion. The learned
// channels operate on centroid-centered coordinates and neighborhood
// aggregates, so they are exactly translation-invariant; the raw camera-frame
// coordinates ride along as the trailing three absolute-position channels.
struct PointFeatureNet {
  int width = 48;
  int out_channels = 48;  // learned channels; the full output adds 3 absolute
  int k = 8;
  nn::Linear l1, edge1, edge2, fuse, out;

  PointFeatureNet() = default;
  PointFeatureNet(int w, int out_c, int k_, Rng& rng)
      : width(w),
        out_channels(out_c),
        k(k_),
        l1(3, w, rng),
        edge1(2 * w, w, rng),
        edge2(2 * w, w, rng),
        fuse(3 * w, w, rng),
        out(w, out_c, rng) {}

  int total_channels() const { return out_channels + 3; }

  // centered: [B*N, 3] centroid-subtracted, abs: [B*N, 3] raw coordinates
  Node* forward(Tape& t, const Mat& centered, const Mat& abs_xyz, long points_per_sample,
                const std::shared_ptr<Eigen::MatrixXi>& idx) {
    Node* x = t.constant(centered);
    Node* h = t.silu(l1(t, x));
    Node* n1 = t.gather_rows_mean(h, idx);
    h = t.silu(edge1(t, t.concat_cols({h, t.sub(n1, h)})));
    Node* n2 = t.gather_rows_mean(h, idx);
    h = t.silu(edge2(t, t.concat_cols({h, t.sub(n2, h)})));
    Node* gmax = t.block_broadcast(t.block_max_rows(h, points_per_sample), points_per_sample);
    Node* gmean = t.block_broadcast(t.block_mean_rows(h, points_per_sample), points_per_sample);
    Node* fused = t.silu(fuse(t, t.concat_cols({h, gmax, gmean})));
    Node* learned = out(t, fused);
    return t.concat_cols({learned, t.constant(abs_xyz)});
  }

  void collect(const std::string& p, nn::NamedParams& outp) {
    l1.collect(p + ".l1", outp);
    edge1.collect(p + ".edge1", outp);
    edge2.collect(p + ".edge2", outp);
    fuse.collect(p + ".fuse", outp);
    out.collect(p + ".out", outp);
  }
};

// Splits a cloud into (centered, absolute) model inputs.
inline void cloud_to_mats(const PointCloud& pc, Mat* centered, Mat* abs_xyz) {
  const long N = static_cast<long>(pc.size());
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pc.points) centroid += p;
  if (N > 0) centroid /= static_cast<double>(N);
  centered->resize(N, 3);
  abs_xyz->resize(N, 3);
  for (long i = 0; i < N; ++i) {
    for (int a = 0; a < 3; ++a) {
      (*centered)(i, a) = static_cast<float>(pc.points[i][a] - centroid[a]);
      (*abs_xyz)(i, a) = static_cast<float>(pc.points[i][a]);
    }
  }
}

}  // namespace cadalign::models
