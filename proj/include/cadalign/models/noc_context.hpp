#pragma once

#include <json.hpp>

#include "cadalign/geometry/types.hpp"
#include "cadalign/nn/layers.hpp"

namespace cadalign::models {

using nn::Mat;
using nn::Node;
using nn::Tape;

constexpr int kTrigBands = 8;  // frequencies 2^0*pi .. 2^7*pi per axis
constexpr int kTrigFeatures = kTrigBands * 2 * 3;

// Sinusoidal positional features of canonical coordinates. At the origin all
// sine entries are zero and all cosines one.
inline Mat trig_features(const std::vector<Vec3>& coords) {
  Mat out(static_cast<long>(coords.size()), kTrigFeatures);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    long c = 0;
    for (int axis = 0; axis < 3; ++axis)
      for (int band = 0; band < kTrigBands; ++band) {
        const double f = std::ldexp(M_PI, band);  // 2^band * pi
        out(static_cast<long>(i), c++) = static_cast<float>(std::sin(f * coords[i][axis]));
        out(static_cast<long>(i), c++) = static_cast<float>(std::cos(f * coords[i][axis]));
      }
  }
  return out;
}

// Trigonometric NOC embedding followed by a single linear projection into the
// context width consumed by the retrieval diffusion.
struct NocContextNet {
  int context_width = 512;
  nn::Linear proj;

  NocContextNet() = default;
  NocContextNet(int width, Rng& rng) : context_width(width), proj(kTrigFeatures, width, rng) {}

  // raw coordinates must already live in the canonical cube
  Mat trig(const NOCSet& nocs) const {
    if (!nocs.in_canonical_cube(1e-9)) throw std::invalid_argument("noc_context: coordinates outside canonical cube");
    return trig_features(nocs.coords);
  }

  nn::Node* forward(nn::Tape& t, const Mat& trig_feats) { return proj(t, t.constant(trig_feats)); }

  Mat eval(const NOCSet& nocs) {
    nn::Tape t(false);
    return forward(t, trig(nocs))->val;
  }

  void collect(const std::string& p, nn::NamedParams& out) { proj.collect(p + ".proj", out); }
};

}  // namespace cadalign::models
