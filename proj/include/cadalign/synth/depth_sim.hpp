#pragma once

#include <cmath>

#include "cadalign/core/image.hpp"
#include "cadalign/core/rng.hpp"

namespace cadalign {

// Parameterized corruption standing in for a monocular depth estimator:
// D = c * f(u,v) * D_gt + eta, with a global log-normal bias c, a smooth
// zero-mean low-frequency multiplicative field and per-pixel Gaussian noise.
struct DepthBiasParams {
  double log_mu = 0.0;     // mean of ln(c)
  double log_sigma = 0.15; // stddev of ln(c)
  double field_amplitude = 0.05;
  double noise_sigma = 0.005;  // meters

  void validate() const {
    if (log_sigma < 0 || field_amplitude < 0 || noise_sigma < 0)
      throw std::invalid_argument("depth bias params must be non-negative");
  }
};

struct SimulatedDepth {
  DepthMap depth;
  double bias = 1.0;  // the sampled c, recorded for bookkeeping
};

inline SimulatedDepth simulate_depth_estimate(const DepthMap& depth_gt, const DepthBiasParams& params,
                                              std::uint64_t seed) {
  params.validate();
  Rng rng(Rng::stream(seed, {streams::kDepthSim}));
  const int W = depth_gt.width(), H = depth_gt.height();

  const double c = rng.lognormal(params.log_mu, params.log_sigma);

  // low-frequency field: a few cosine modes, renormalized to exact zero mean
  // and unit peak over the grid so f = 1 + a*g stays positive for a < 1
  constexpr int kModes = 3;
  double px[kModes], py[kModes], phase[kModes], wgt[kModes];
  for (int m = 0; m < kModes; ++m) {
    px[m] = rng.uniform_int(0, 2);
    py[m] = rng.uniform_int(0, 2);
    if (px[m] == 0 && py[m] == 0) px[m] = 1;
    phase[m] = rng.uniform(0, 2 * M_PI);
    wgt[m] = rng.uniform(0.3, 1.0);
  }
  std::vector<double> field(static_cast<std::size_t>(W) * H, 0.0);
  if (params.field_amplitude > 0) {
    double mean = 0;
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        double gsum = 0;
        for (int m = 0; m < kModes; ++m)
          gsum += wgt[m] * std::cos(2 * M_PI * (px[m] * u / static_cast<double>(W) + py[m] * v / static_cast<double>(H)) + phase[m]);
        field[v * W + u] = gsum;
        mean += gsum;
      }
    mean /= field.size();
    double peak = 0;
    for (auto& g : field) {
      g -= mean;
      peak = std::max(peak, std::abs(g));
    }
    if (peak > 0)
      for (auto& g : field) g = g / peak * params.field_amplitude;
  }

  SimulatedDepth out;
  out.bias = c;
  out.depth = DepthMap(W, H, 1, 0.0f);
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const double z = depth_gt.at(u, v);
      if (!(z > 0)) continue;  // keep holes empty
      double d = c * (1.0 + field[v * W + u]) * z;
      if (params.noise_sigma > 0) d += rng.normal(0, params.noise_sigma);
      out.depth.at(u, v) = std::max(1e-3, d);
    }
  return out;
}

// Scale offset between an estimated and a reference depth map over a mask:
// the mean of the per-pixel Hadamard ratio. A uniform corruption by c yields
// exactly c. Pixels require mask set and reference depth > 0.
inline double scale_gt(const DepthMap& depth_est, const DepthMap& depth_ref, const InstanceMask& mask,
                       std::uint16_t instance_id = 0 /* 0 = any nonzero id */) {
  if (!depth_est.same_shape(depth_ref)) throw std::invalid_argument("scale_gt: shape mismatch");
  double sum = 0;
  long count = 0;
  for (int v = 0; v < depth_est.height(); ++v)
    for (int u = 0; u < depth_est.width(); ++u) {
      const auto id = mask.at(u, v);
      if (instance_id == 0 ? id == 0 : id != instance_id) continue;
      const double ref = depth_ref.at(u, v);
      if (!(ref > 0)) continue;
      sum += depth_est.at(u, v) / ref;
      ++count;
    }
  if (count == 0) throw std::runtime_error("scale_gt: empty mask");
  return sum / count;
}

}  // namespace cadalign
