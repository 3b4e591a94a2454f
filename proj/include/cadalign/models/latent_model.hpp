#pragma once

#include "cadalign/ddpm/diffusion.hpp"
#include "cadalign/models/noc_context.hpp"

namespace cadalign::models {

struct LatentModelArch {
  int latent_dim = 64;
  int context_width = 512;
  int context_points = 256;  // NOC points subsampled into the context
  int width = 128;           // attention/track width
  int attn_dim = 64;
  int blocks = 2;
  int temb = 6;

  nlohmann::json to_json() const {
    return {{"latent_dim", latent_dim}, {"context_width", context_width}, {"context_points", context_points},
            {"width", width},           {"attn_dim", attn_dim},           {"blocks", blocks},
            {"temb", temb}};
  }
  static LatentModelArch from_json(const nlohmann::json& j) {
    LatentModelArch a;
    a.latent_dim = j.at("latent_dim");
    a.context_width = j.at("context_width");
    a.context_points = j.at("context_points");
    a.width = j.at("width");
    a.attn_dim = j.at("attn_dim");
    a.blocks = j.at("blocks");
    a.temb = j.at("temb");
    return a;
  }
};

// Retrieval diffusion: denoises the shape latent directly (x0 objective),
// reading the NOC evidence through single-head cross-attention in every block.
struct LatentModel {
  LatentModelArch arch;
  bool trained = false;
  NocContextNet context;
  nn::Linear stem;
  struct Block {
    nn::Linear q, k, v, fuse;
  };
  std::vector<Block> blocks;
  nn::Linear head;

  LatentModel() = default;
  LatentModel(const LatentModelArch& a, Rng& rng)
      : arch(a), context(a.context_width, rng), stem(a.latent_dim + a.temb, a.width, rng) {
    for (int b = 0; b < a.blocks; ++b)
      blocks.push_back(Block{nn::Linear(a.width, a.attn_dim, rng), nn::Linear(a.context_width, a.attn_dim, rng),
                             nn::Linear(a.context_width, a.attn_dim, rng),
                             nn::Linear(a.width + a.attn_dim, a.width, rng)});
    head = nn::Linear(a.width, a.latent_dim, rng);
  }

  // z_t: [B, d]; trig_ctx: stacked per-sample contexts [B * n_ctx, 48]
  Node* denoise(Tape& t, Node* z_t, Node* temb_rows, const Mat& trig_ctx) {
    const long B = z_t->val.rows();
    const long n_ctx = trig_ctx.rows() / B;
    Node* h = t.silu(stem(t, t.concat_cols({z_t, temb_rows})));
    Node* ctx_all = context.forward(t, trig_ctx);  // [B*n_ctx, context_width]
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(arch.attn_dim));
    for (auto& blk : blocks) {
      Node* q = blk.q(t, h);
      Node* K_all = blk.k(t, ctx_all);
      Node* V_all = blk.v(t, ctx_all);
      std::vector<Node*> attn_rows;
      attn_rows.reserve(B);
      for (long b = 0; b < B; ++b) {
        Node* K = t.slice_rows(K_all, b * n_ctx, n_ctx);
        Node* V = t.slice_rows(V_all, b * n_ctx, n_ctx);
        Node* qb = t.slice_rows(q, b, 1);
        Node* scores = t.scale(t.matmul(qb, t.transpose(K)), inv_sqrt);
        attn_rows.push_back(t.matmul(t.softmax_rows(scores), V));
      }
      Node* attn = t.concat_rows(attn_rows);
      h = t.add(h, t.silu(blk.fuse(t, t.concat_cols({h, attn}))));
    }
    return head(t, h);
  }

  void collect(nn::NamedParams& out) {
    context.collect("context", out);
    stem.collect("stem", out);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::string p = "block" + std::to_string(b);
      blocks[b].q.collect(p + ".q", out);
      blocks[b].k.collect(p + ".k", out);
      blocks[b].v.collect(p + ".v", out);
      blocks[b].fuse.collect(p + ".fuse", out);
    }
    head.collect("head", out);
  }

  // subsample the NOC set to the context size and embed
  Mat trig_context(const NOCSet& nocs, std::uint64_t seed) const {
    std::vector<Vec3> pts = nocs.coords;
    if (static_cast<int>(pts.size()) != arch.context_points) {
      Rng rng(seed);
      std::vector<Vec3> picked(arch.context_points);
      if (static_cast<int>(pts.size()) >= arch.context_points) {
        const auto idx = rng.sample_without_replacement(static_cast<int>(pts.size()), arch.context_points);
        for (int i = 0; i < arch.context_points; ++i) picked[i] = pts[idx[i]];
      } else {
        for (int i = 0; i < arch.context_points; ++i) picked[i] = pts[rng.uniform_index(pts.size())];
      }
      pts = std::move(picked);
    }
    NOCSet sub = NOCSet::from_clamped(std::move(pts));
    return trig_features(sub.coords);
  }

  // one latent sample conditioned on a NOC set; normalization constants map
  // between raw autoencoder codes and the diffusion's working range
  Mat z_mean = Mat(), z_std = Mat();  // [1, d], fit on the shape database

  Mat sample_latent(const NOCSet& nocs, const ddpm::Schedule& sched, std::uint64_t seed, int stride = 1) {
    if (!trained) throw std::runtime_error("latent model is untrained");
    const Mat trig = trig_context(nocs, Rng::mix(seed, 17));
    ddpm::DenoiseFn fn = [&](const Mat& z_t, int t) {
      Tape tp(false);
      Mat temb_rows = Mat::Zero(1, arch.temb);
      temb_rows.row(0) = nn::timestep_embedding(t, sched.T, arch.temb / 2).row(0);
      return denoise(tp, tp.constant(z_t), tp.constant(temb_rows), trig)->val;
    };
    const auto out = ddpm::sample(fn, 1, arch.latent_dim, sched, seed, ddpm::ParamKind::X0, 1, stride);
    Mat z = out[0];
    if (z_mean.size() > 0) z = (z.array() * z_std.array() + z_mean.array()).matrix();
    return z;
  }

  Mat normalize_code(const Mat& z_raw) const {
    if (z_mean.size() == 0) return z_raw;
    return ((z_raw.array() - z_mean.array()) / z_std.array()).matrix();
  }
};

}  // namespace cadalign::models
