#pragma once

#include <json.hpp>

#include "cadalign/core/image.hpp"
#include "cadalign/nn/layers.hpp"

namespace cadalign::models {

using nn::Mat;
using nn::Node;
using nn::Tape;

inline Mat depth_to_rows(const DepthMap& d, double norm = 3.0) {
  Mat m(static_cast<long>(d.size()), 1);
  for (std::size_t i = 0; i < d.raw().size(); ++i) m(static_cast<long>(i), 0) = static_cast<float>(d.raw()[i] / norm);
  return m;
}

// Hierarchical convolutional encoder-decoder over a depth map; output keeps
// the input's spatial dimensions. A global average branch at the bottleneck
// gives every pixel scene-level context.
struct DepthFeatureNet {
  int width = 8;       // base channel count
  int out_channels = 8;
  nn::Conv3x3 enc1, enc2, enc3;
  nn::Linear mid, dec0;
  nn::Conv3x3 dec1, dec2;
  nn::Linear head;

  DepthFeatureNet() = default;
  DepthFeatureNet(int w, int out, Rng& rng)
      : width(w),
        out_channels(out),
        enc1(1, w, rng),
        enc2(w, 2 * w, rng),
        enc3(2 * w, 2 * w, rng),
        mid(4 * w, 2 * w, rng),
        dec0(2 * w, 2 * w, rng),
        dec1(2 * w + 2 * w, w, rng),
        dec2(w + w, w, rng),
        head(w, out, rng) {}

  // x: [B*H*W, 1]; H and W must be divisible by 4
  Node* forward(Tape& t, Node* x, long B, long H, long W) {
    if (H % 4 || W % 4) throw std::invalid_argument("depth features: H and W must be divisible by 4");
    Node* e1 = t.silu(enc1(t, x, B, H, W));
    Node* p1 = t.avgpool2(e1, B, H, W);
    Node* e2 = t.silu(enc2(t, p1, B, H / 2, W / 2));
    Node* p2 = t.avgpool2(e2, B, H / 2, W / 2);
    Node* e3 = t.silu(enc3(t, p2, B, H / 4, W / 4));
    Node* g = t.block_broadcast(t.block_mean_rows(e3, (H / 4) * (W / 4)), (H / 4) * (W / 4));
    Node* m = t.silu(mid(t, t.concat_cols({e3, g})));
    Node* b0 = t.silu(dec0(t, m));
    Node* u1 = t.upsample2(b0, B, H / 4, W / 4);
    Node* d1 = t.silu(dec1(t, t.concat_cols({u1, e2}), B, H / 2, W / 2));
    Node* u2 = t.upsample2(d1, B, H / 2, W / 2);
    Node* d2 = t.silu(dec2(t, t.concat_cols({u2, e1}), B, H, W));
    return head(t, d2);
  }

  void collect(const std::string& p, nn::NamedParams& out) {
    enc1.collect(p + ".enc1", out);
    enc2.collect(p + ".enc2", out);
    enc3.collect(p + ".enc3", out);
    mid.collect(p + ".mid", out);
    dec0.collect(p + ".dec0", out);
    dec1.collect(p + ".dec1", out);
    dec2.collect(p + ".dec2", out);
    head.collect(p + ".head", out);
  }
};

}  // namespace cadalign::models
