#pragma once

#include "cadalign/ddpm/diffusion.hpp"
#include "cadalign/models/depth_features.hpp"

namespace cadalign::models {

// Constant-fill diffusion target for an isotropic scene scale and its inverse
// (the spatial mean). Round trips exactly.
inline Mat build_scale_target(double s, long rows) {
  if (!(s > 0)) throw std::invalid_argument("build_scale_target: scale must be positive");
  return Mat::Constant(rows, 1, static_cast<float>(s));
}

inline double scale_from_sample(const Mat& S) {
  double sum = 0;
  for (long i = 0; i < S.rows(); ++i)
    for (long j = 0; j < S.cols(); ++j) sum += S(i, j);
  return sum / static_cast<double>(S.size());
}

struct ScaleModelArch {
  int feat_width = 8;
  int feat_channels = 8;
  int unet_width = 12;
  int temb = 6;
  // diffusion target normalization: x0 = (s - shift) / spread
  float shift = 1.0f;
  float spread = 0.25f;
  double depth_norm = 3.0;
  int downsample = 1;  // average-pool the depth input before the model

  nlohmann::json to_json() const {
    return {{"feat_width", feat_width}, {"feat_channels", feat_channels}, {"unet_width", unet_width},
            {"temb", temb},             {"shift", shift},                 {"spread", spread},
            {"depth_norm", depth_norm}, {"downsample", downsample}};
  }
  static ScaleModelArch from_json(const nlohmann::json& j) {
    ScaleModelArch a;
    a.feat_width = j.at("feat_width");
    a.feat_channels = j.at("feat_channels");
    a.unet_width = j.at("unet_width");
    a.temb = j.at("temb");
    a.shift = j.at("shift");
    a.spread = j.at("spread");
    a.depth_norm = j.at("depth_norm");
    a.downsample = j.at("downsample");
    return a;
  }
};

// Scene-scale diffusion: a small UNet denoises the constant scale map,
// conditioned per pixel on depth features concatenated with the noised target.
struct ScaleModel {
  ScaleModelArch arch;
  bool trained = false;
  DepthFeatureNet features;
  nn::Conv3x3 e1, e2, e3;
  nn::Linear mid;
  nn::Conv3x3 d1, d2;
  nn::Linear head;

  ScaleModel() = default;
  ScaleModel(const ScaleModelArch& a, Rng& rng)
      : arch(a),
        features(a.feat_width, a.feat_channels, rng),
        e1(1 + a.feat_channels + a.temb, a.unet_width, rng),
        e2(a.unet_width, 2 * a.unet_width, rng),
        e3(2 * a.unet_width, 2 * a.unet_width, rng),
        mid(4 * a.unet_width, 2 * a.unet_width, rng),
        d1(2 * a.unet_width + 2 * a.unet_width, a.unet_width, rng),
        d2(a.unet_width + a.unet_width, a.unet_width, rng),
        head(a.unet_width, 1, rng) {}

  Node* denoise(Tape& t, Node* s_t, Node* feats, Node* temb_rows, long B, long H, long W) {
    Node* in = t.concat_cols({s_t, feats, temb_rows});
    Node* a1 = t.silu(e1(t, in, B, H, W));
    Node* p1 = t.avgpool2(a1, B, H, W);
    Node* a2 = t.silu(e2(t, p1, B, H / 2, W / 2));
    Node* p2 = t.avgpool2(a2, B, H / 2, W / 2);
    Node* a3 = t.silu(e3(t, p2, B, H / 4, W / 4));
    Node* g = t.block_broadcast(t.block_mean_rows(a3, (H / 4) * (W / 4)), (H / 4) * (W / 4));
    Node* m = t.silu(mid(t, t.concat_cols({a3, g})));
    Node* u1 = t.upsample2(m, B, H / 4, W / 4);
    Node* b1 = t.silu(d1(t, t.concat_cols({u1, a2}), B, H / 2, W / 2));
    Node* u2 = t.upsample2(b1, B, H / 2, W / 2);
    Node* b2 = t.silu(d2(t, t.concat_cols({u2, a1}), B, H, W));
    return head(t, b2);
  }

  void collect(nn::NamedParams& out) {
    features.collect("features", out);
    e1.collect("e1", out);
    e2.collect("e2", out);
    e3.collect("e3", out);
    mid.collect("mid", out);
    d1.collect("d1", out);
    d2.collect("d2", out);
    head.collect("head", out);
  }

  // depth preprocessing shared by training and inference
  Mat prepare_depth(const DepthMap& depth, int* H_out, int* W_out) const {
    DepthMap d = depth;
    for (int k = 1; k < arch.downsample; k *= 2) {
      DepthMap half(d.width() / 2, d.height() / 2, 1);
      for (int v = 0; v < half.height(); ++v)
        for (int u = 0; u < half.width(); ++u)
          half.at(u, v) = 0.25 * (d.at(2 * u, 2 * v) + d.at(2 * u + 1, 2 * v) + d.at(2 * u, 2 * v + 1) +
                                  d.at(2 * u + 1, 2 * v + 1));
      d = std::move(half);
    }
    *H_out = d.height();
    *W_out = d.width();
    return depth_to_rows(d, arch.depth_norm);
  }

  // condition features with gradients disabled, reusable across chain steps
  Mat eval_features(const Mat& depth_rows, long H, long W) {
    Tape t(false);
    return features.forward(t, t.constant(depth_rows), 1, H, W)->val;
  }

  // n reverse-chain samples reduced to scalars by the spatial mean; clamped
  // at a small positive floor
  std::vector<double> sample_scales(const DepthMap& depth, const ddpm::Schedule& sched, int n, std::uint64_t seed,
                                    int stride = 1) {
    if (!trained) throw std::runtime_error("scale model is untrained");
    int H = 0, W = 0;
    const Mat depth_rows = prepare_depth(depth, &H, &W);
    Tape ft(false);
    const Mat feats = features.forward(ft, ft.constant(depth_rows), 1, H, W)->val;

    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
      ddpm::DenoiseFn fn = [&](const Mat& s_t, int t) {
        Tape tp(false);
        Mat temb_rows = Mat::Zero(s_t.rows(), arch.temb);
        temb_rows.rowwise() = nn::timestep_embedding(t, sched.T, arch.temb / 2).row(0);
        return denoise(tp, tp.constant(s_t), tp.constant(feats), tp.constant(temb_rows), 1, H, W)->val;
      };
      const auto samples =
          ddpm::sample(fn, static_cast<long>(H) * W, 1, sched, Rng::stream(seed, {streams::kScaleSample, static_cast<std::uint64_t>(i)}),
                       ddpm::ParamKind::Epsilon, 1, stride);
      const double normalized = scale_from_sample(samples[0]);
      const double s = normalized * arch.spread + arch.shift;
      out.push_back(std::max(1e-3, s));
    }
    return out;
  }
};

}  // namespace cadalign::models
