#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadalign::ddpm {

// Variance schedule: beta_t for t = 1..T with precomputed alpha products.
// alpha_bar_at(0) == 1 by convention, which makes the terminal reverse step
// collapse to the predicted x0.
struct Schedule {
  int T = 0;
  std::vector<double> beta;       // [t-1]
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product

  double beta_at(int t) const { return beta.at(t - 1); }
  double alpha_at(int t) const { return alpha.at(t - 1); }
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }

  // strictly-in-(0,1) betas and strictly decreasing alpha_bar
  void validate() const {
    if (T < 1 || static_cast<int>(beta.size()) != T) throw std::invalid_argument("schedule: bad length");
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      if (!(beta_at(t) > 0.0 && beta_at(t) < 1.0)) throw std::invalid_argument("schedule: beta out of (0,1)");
      if (!(alpha_bar_at(t) < prev)) throw std::invalid_argument("schedule: alpha_bar not strictly decreasing");
      prev = alpha_bar_at(t);
    }
  }

  // training-grade schedules additionally need a near-Gaussian terminal state
  bool terminal_is_gaussian() const { return alpha_bar_at(T) < 0.01; }
};

inline Schedule make_schedule(int T, double beta_start, double beta_end, const std::string& kind = "linear") {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
    throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");

  Schedule s;
  s.T = T;
  s.beta.resize(T);
  if (kind == "linear") {
    for (int t = 0; t < T; ++t)
      s.beta[t] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (T - 1.0);
  } else if (kind == "cosine") {
    // squared-cosine alpha_bar profile with betas clipped into the valid range
    auto f = [&](double u) {
      const double v = std::cos((u + 0.008) / 1.008 * M_PI / 2.0);
      return v * v;
    };
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double ab = f(static_cast<double>(t) / T) / f(0.0);
      double b = 1.0 - ab / prev;
      b = std::min(0.999, std::max(1e-8, b));
      s.beta[t - 1] = b;
      prev *= (1.0 - b);
    }
  } else {
    throw std::invalid_argument("make_schedule: unknown kind " + kind);
  }

  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  s.validate();
  return s;
}

}  // namespace cadalign::ddpm
