#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <vector>

namespace cadalign {

// Deterministic RNG used everywhere in the library. All distributions are
// implemented on top of the raw 64-bit stream so results are identical across
// standard libraries; std::* distributions are deliberately avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix(a + 0x9e3779b97f4a7c15ull * (b + 1));
  }

  // Derives a child seed from a root seed and a label path, e.g.
  // stream(seed, {kView, view_id, kScale, i}). Children are independent for
  // distinct paths and stable across runs.
  static std::uint64_t stream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix(root);
    for (std::uint64_t p : path) s = mix(s, p);
    return s;
  }

  std::uint64_t next_u64() {
    // xorshift* step on splitmix-initialized state
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  // standard normal via Box-Muller (no cached spare, keeps the stream simple)
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

  // Partial Fisher-Yates: k distinct indices out of [0, n)
  std::vector<int> sample_without_replacement(int n, int k, std::vector<int>* scratch = nullptr) {
    std::vector<int> local;
    std::vector<int>& pool = scratch ? *scratch : local;
    pool.resize(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(uniform_index(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    return out;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(v[i], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t state_;
};

// Labels for stream derivation; fixed values are part of the reproducibility
// contract (changing them changes every seeded artifact).
namespace streams {
constexpr std::uint64_t kShape = 1;
constexpr std::uint64_t kScene = 2;
constexpr std::uint64_t kView = 3;
constexpr std::uint64_t kDepthSim = 4;
constexpr std::uint64_t kAugment = 5;
constexpr std::uint64_t kSubsample = 6;
constexpr std::uint64_t kTrain = 7;
constexpr std::uint64_t kScaleSample = 8;
constexpr std::uint64_t kNocSample = 9;
constexpr std::uint64_t kLatentSample = 10;
constexpr std::uint64_t kRansac = 11;
constexpr std::uint64_t kSrs = 12;
constexpr std::uint64_t kInit = 13;
constexpr std::uint64_t kMeshSample = 14;
constexpr std::uint64_t kQueries = 15;
}  // namespace streams

}  // namespace cadalign
