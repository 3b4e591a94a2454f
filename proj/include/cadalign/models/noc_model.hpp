#pragma once

#include "cadalign/ddpm/diffusion.hpp"
#include "cadalign/models/point_features.hpp"

namespace cadalign::models {

struct NocModelArch {
  int feat_width = 48;
  int feat_channels = 48;
  int knn = 8;
  int width = 64;
  int temb = 6;
  float noc_spread = 0.35f;  // x0 = noc / spread, so targets span roughly N(0,1)

  nlohmann::json to_json() const {
    return {{"feat_width", feat_width}, {"feat_channels", feat_channels}, {"knn", knn},
            {"width", width},           {"temb", temb},                   {"noc_spread", noc_spread}};
  }
  static NocModelArch from_json(const nlohmann::json& j) {
    NocModelArch a;
    a.feat_width = j.at("feat_width");
    a.feat_channels = j.at("feat_channels");
    a.knn = j.at("knn");
    a.width = j.at("width");
    a.temb = j.at("temb");
    a.noc_spread = j.at("noc_spread");
    return a;
  }
};

// Alignment diffusion: denoises per-point normalized object coordinates,
// conditioned on per-point features of the back-projected cloud. Pointwise
// stacks plus pooled context keep the network permutation-equivariant.
struct NocModel {
  NocModelArch arch;
  bool trained = false;
  PointFeatureNet features;
  nn::Linear l1, l2, ctx, l3, head;

  NocModel() = default;
  NocModel(const NocModelArch& a, Rng& rng)
      : arch(a),
        features(a.feat_width, a.feat_channels, a.knn, rng),
        l1(3 + a.feat_channels + 3 + a.temb, a.width, rng),
        l2(a.width, a.width, rng),
        ctx(3 * a.width, a.width, rng),
        l3(a.width, a.width, rng),
        head(a.width, 3, rng) {}

  Node* denoise(Tape& t, Node* noc_t, Node* feats, Node* temb_rows, long points_per_sample) {
    Node* h = t.silu(l1(t, t.concat_cols({noc_t, feats, temb_rows})));
    h = t.silu(l2(t, h));
    Node* gmax = t.block_broadcast(t.block_max_rows(h, points_per_sample), points_per_sample);
    Node* gmean = t.block_broadcast(t.block_mean_rows(h, points_per_sample), points_per_sample);
    h = t.silu(ctx(t, t.concat_cols({h, gmax, gmean})));
    h = t.silu(l3(t, h));
    return head(t, h);
  }

  void collect(nn::NamedParams& out) {
    features.collect("features", out);
    l1.collect("l1", out);
    l2.collect("l2", out);
    ctx.collect("ctx", out);
    l3.collect("l3", out);
    head.collect("head", out);
  }

  Mat eval_features(const PointCloud& pc) {
    Mat centered, abs_xyz;
    cloud_to_mats(pc, &centered, &abs_xyz);
    const auto idx = knn_indices(centered, arch.knn);
    Tape t(false);
    return features.forward(t, centered, abs_xyz, centered.rows(), idx)->val;
  }

  // one NOC set sampled from the reverse chain, conditioned on the cloud
  NOCSet sample_noc(const PointCloud& pc, const ddpm::Schedule& sched, std::uint64_t seed, int stride = 1,
                    const Mat* cached_feats = nullptr) {
    if (!trained) throw std::runtime_error("noc model is untrained");
    const long N = static_cast<long>(pc.size());
    const Mat feats = cached_feats ? *cached_feats : eval_features(pc);
    ddpm::DenoiseFn fn = [&](const Mat& x_t, int t) {
      Tape tp(false);
      Mat temb_rows = Mat::Zero(N, arch.temb);
      temb_rows.rowwise() = nn::timestep_embedding(t, sched.T, arch.temb / 2).row(0);
      return denoise(tp, tp.constant(x_t), tp.constant(feats), tp.constant(temb_rows), N)->val;
    };
    const auto out = ddpm::sample(fn, N, 3, sched, seed, ddpm::ParamKind::Epsilon, 1, stride);
    std::vector<Vec3> coords(N);
    for (long i = 0; i < N; ++i)
      for (int a = 0; a < 3; ++a) coords[i][a] = out[0](i, a) * arch.noc_spread;
    return NOCSet::from_clamped(std::move(coords));
  }
};

}  // namespace cadalign::models
