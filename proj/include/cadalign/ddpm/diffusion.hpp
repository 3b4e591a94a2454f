#pragma once

#include <functional>

#include "cadalign/core/rng.hpp"
#include "cadalign/ddpm/schedule.hpp"
#include "cadalign/nn/graph.hpp"

namespace cadalign::ddpm {

using nn::Mat;

enum class ParamKind { Epsilon, X0 };

inline const char* param_kind_name(ParamKind k) { return k == ParamKind::Epsilon ? "epsilon" : "x0"; }
inline ParamKind param_kind_from_name(const std::string& s) {
  if (s == "epsilon") return ParamKind::Epsilon;
  if (s == "x0") return ParamKind::X0;
  throw std::invalid_argument("unknown parameterization: " + s);
}

// A denoiser bound to its condition: (x_t, t) -> prediction (epsilon-hat or
// x0-hat according to the declared parameterization).
using DenoiseFn = std::function<Mat(const Mat& x_t, int t)>;

inline Mat gaussian_like(long rows, long cols, Rng& rng) {
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = static_cast<float>(rng.normal());
  return m;
}

// Closed-form forward marginal: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
inline Mat q_sample(const Mat& x0, int t, const Mat& eps, const Schedule& sched) {
  if (t < 1 || t > sched.T) throw std::invalid_argument("q_sample: t out of range");
  if (eps.rows() != x0.rows() || eps.cols() != x0.cols()) throw std::invalid_argument("q_sample: shape mismatch");
  const double ab = sched.alpha_bar_at(t);
  return (std::sqrt(ab) * x0.array() + std::sqrt(1.0 - ab) * eps.array()).matrix();
}

// Single-draw training loss at fixed (t, eps): the L1 objective in either
// parameterization. Deterministic, used directly by gradient checks.
inline double training_loss_at(const DenoiseFn& denoiser, const Mat& x0, int t, const Mat& eps,
                               const Schedule& sched, ParamKind kind) {
  const Mat x_t = q_sample(x0, t, eps, sched);
  const Mat pred = denoiser(x_t, t);
  if (pred.rows() != x0.rows() || pred.cols() != x0.cols())
    throw std::invalid_argument("training_loss: prediction shape mismatch");
  const Mat& target = kind == ParamKind::Epsilon ? eps : x0;
  const double loss = (pred - target).cwiseAbs().mean();
  if (!std::isfinite(loss)) throw std::runtime_error("training divergence");
  return loss;
}

// Stochastic loss: t ~ U{1..T}, eps ~ N(0, I).
inline double training_loss(const DenoiseFn& denoiser, const Mat& x0, const Schedule& sched, ParamKind kind,
                            Rng& rng) {
  const int t = 1 + static_cast<int>(rng.uniform_index(sched.T));
  const Mat eps = gaussian_like(x0.rows(), x0.cols(), rng);
  return training_loss_at(denoiser, x0, t, eps, sched, kind);
}

// x0-hat implied by an epsilon prediction (and vice versa).
inline Mat x0_from_eps(const Mat& x_t, const Mat& eps_hat, double alpha_bar_t) {
  return ((x_t.array() - std::sqrt(1.0 - alpha_bar_t) * eps_hat.array()) / std::sqrt(alpha_bar_t)).matrix();
}

// One reverse step t -> t_prev (t_prev < t, possibly skipping timesteps).
// Uses the Gaussian posterior q(x_{t_prev} | x_t, x0-hat) with the fixed
// variance choice; no noise is added on the terminal step (t_prev == 0, where
// the mean collapses to x0-hat).
inline Mat denoise_step(const DenoiseFn& denoiser, const Mat& x_t, int t, int t_prev, const Schedule& sched,
                        Rng& rng, ParamKind kind) {
  if (t < 1 || t > sched.T || t_prev < 0 || t_prev >= t) throw std::invalid_argument("denoise_step: bad t");
  const double ab_t = sched.alpha_bar_at(t);
  const double ab_prev = sched.alpha_bar_at(t_prev);
  const double alpha_eff = ab_t / ab_prev;
  const double beta_eff = 1.0 - alpha_eff;

  const Mat pred = denoiser(x_t, t);
  const Mat x0_hat = kind == ParamKind::Epsilon ? x0_from_eps(x_t, pred, ab_t) : pred;

  const double c0 = std::sqrt(ab_prev) * beta_eff / (1.0 - ab_t);
  const double ct = std::sqrt(alpha_eff) * (1.0 - ab_prev) / (1.0 - ab_t);
  Mat mean = (c0 * x0_hat.array() + ct * x_t.array()).matrix();
  if (!mean.allFinite()) throw std::runtime_error("denoise_step: non-finite output");

  if (t_prev == 0) return mean;
  const double var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_eff;
  const Mat noise = gaussian_like(x_t.rows(), x_t.cols(), rng);
  return mean + static_cast<float>(std::sqrt(var)) * noise;
}

// Reverse-chain timestep sequence T, T-stride, ..., always ending at 1.
inline std::vector<int> sample_times(int T, int stride) {
  std::vector<int> ts;
  for (int t = T; t >= 1; t -= stride) ts.push_back(t);
  if (ts.back() != 1) ts.push_back(1);
  return ts;
}

// Runs the full reverse chain num_samples times with independent noise
// streams derived from the seed; stride 1 is the exact DDPM chain and the
// default, larger strides skip timesteps for cheaper inference.
inline std::vector<Mat> sample(const DenoiseFn& denoiser, long rows, long cols, const Schedule& sched,
                               std::uint64_t seed, ParamKind kind, int num_samples, int stride = 1) {
  std::vector<Mat> out;
  const auto times = sample_times(sched.T, stride);
  for (int i = 0; i < num_samples; ++i) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(i)));
    Mat x = gaussian_like(rows, cols, rng);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const int t = times[j];
      const int t_prev = j + 1 < times.size() ? times[j + 1] : 0;
      x = denoise_step(denoiser, x, t, t_prev, sched, rng, kind);
      if (!x.allFinite()) throw std::runtime_error("sample: non-finite intermediate");
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace cadalign::ddpm
