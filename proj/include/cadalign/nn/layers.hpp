#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cadalign/core/rng.hpp"
#include "cadalign/nn/graph.hpp"

namespace cadalign::nn {

using NamedParams = std::vector<std::pair<std::string, Param*>>;

inline Mat glorot(long rows, long cols, Rng& rng, long fan_in = -1, long fan_out = -1) {
  if (fan_in < 0) fan_in = rows;
  if (fan_out < 0) fan_out = cols;
  const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = static_cast<float>(rng.uniform(-a, a));
  return m;
}

struct Linear {
  Param W, b;

  Linear() = default;
  Linear(long in, long out, Rng& rng) : W(glorot(in, out, rng)), b(Mat::Zero(1, out)) {}

  Node* operator()(Tape& t, Node* x) { return t.add_rowvec(t.matmul(x, t.param(W)), t.param(b)); }

  void collect(const std::string& prefix, NamedParams& out) {
    out.emplace_back(prefix + ".W", &W);
    out.emplace_back(prefix + ".b", &b);
  }
};

// 3x3 same-padding convolution over [B*H*W, C] feature maps.
struct Conv3x3 {
  Param W, b;  // W: [Cin*9, Cout]

  Conv3x3() = default;
  Conv3x3(long cin, long cout, Rng& rng) : W(glorot(cin * 9, cout, rng, cin * 9, cout)), b(Mat::Zero(1, cout)) {}

  Node* operator()(Tape& t, Node* x, long B, long H, long W_) {
    return t.add_rowvec(t.matmul(t.im2col3(x, B, H, W_), t.param(W)), t.param(b));
  }

  void collect(const std::string& prefix, NamedParams& out) {
    out.emplace_back(prefix + ".W", &W);
    out.emplace_back(prefix + ".b", &b);
  }
};

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with per-parameter moment state; step() applies and clears gradients.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg = AdamConfig{}) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param& p = *params_[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0f - cfg_.beta1) * p.grad;
      v_[i] = (cfg_.beta2 * v_[i].array() + (1.0f - cfg_.beta2) * p.grad.array().square()).matrix();
      p.value.array() -= cfg_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
      p.zero_grad();
    }
  }

  void set_lr(float lr) { cfg_.lr = lr; }
  long step_count() const { return t_; }

  // optimizer state round-trips through checkpoints so training can resume
  // bit-identically
  const std::vector<Mat>& m() const { return m_; }
  const std::vector<Mat>& v() const { return v_; }
  void restore(long t, std::vector<Mat> m, std::vector<Mat> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

// sinusoidal embedding of a diffusion timestep, [1, 2*bands]
inline Mat timestep_embedding(int t, int T, int bands = 3) {
  Mat e(1, 2 * bands);
  const float x = static_cast<float>(t) / static_cast<float>(T);
  for (int k = 0; k < bands; ++k) {
    const float f = std::pow(2.0f, static_cast<float>(k)) * 3.14159265358979f;
    e(0, 2 * k) = std::sin(f * x);
    e(0, 2 * k + 1) = std::cos(f * x);
  }
  return e;
}

}  // namespace cadalign::nn
