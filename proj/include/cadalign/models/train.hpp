#pragma once

#include <optional>

#include "cadalign/geometry/backproject.hpp"
#include "cadalign/models/latent_model.hpp"
#include "cadalign/models/noc_model.hpp"
#include "cadalign/models/scale_model.hpp"
#include "cadalign/models/shape_autoencoder.hpp"
#include "cadalign/synth/dataset.hpp"

namespace cadalign::models {

struct TrainConfig {
  int steps = 1500;
  int batch = 8;
  float lr = 1.5e-3f;
  float lr_drop_at = 0.7f;  // fraction of steps after which lr is quartered
};

struct TrainReport {
  std::vector<float> losses;
  std::optional<ddpm::ParamKind> param_kind;  // objective instrumentation
  float loss_head(int window = 50) const { return window_mean(0, window); }
  float loss_tail(int window = 50) const { return window_mean(std::max<int>(0, losses.size() - window), window); }

 private:
  float window_mean(int from, int window) const {
    const int to = std::min<int>(losses.size(), from + window);
    if (to <= from) return 0;
    float s = 0;
    for (int i = from; i < to; ++i) s += losses[i];
    return s / (to - from);
  }
};

namespace detail {

inline void check_finite(float loss) {
  if (!std::isfinite(loss)) throw std::runtime_error("training divergence");
}

inline float lr_for_step(const TrainConfig& cfg, int step) {
  return step < static_cast<int>(cfg.lr_drop_at * cfg.steps) ? cfg.lr : cfg.lr * 0.25f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// shape autoencoder

inline TrainReport train_shape_autoencoder(ShapeAutoencoder& ae, const std::vector<ShapeModel>& db,
                                           const TrainConfig& cfg, std::uint64_t seed, nn::Adam& opt,
                                           int start_step = 0) {
  const int S = ae.arch.surface_points;
  const int Q = 256;
  std::vector<Mat> surfaces;
  surfaces.reserve(db.size());
  for (const auto& shape : db) surfaces.push_back(ae.surface_rows(shape, S));

  TrainReport rep;
  for (int step = start_step; step < cfg.steps; ++step) {
    Rng rng(Rng::stream(seed, {streams::kTrain, 0 /*shape_ae*/, static_cast<std::uint64_t>(step)}));
    const int B = std::min<int>(cfg.batch, db.size());
    Mat surf(B * S, 3);
    std::vector<Vec3> queries;
    queries.reserve(B * Q);
    Mat labels(B * Q, 1);
    for (int b = 0; b < B; ++b) {
      const int si = static_cast<int>(rng.uniform_index(db.size()));
      const ShapeModel& shape = db[si];
      surf.middleRows(b * S, S) = surfaces[si];
      const auto near = sample_mesh_surface(shape.mesh, Q / 2, rng.next_u64());
      for (int qi = 0; qi < Q; ++qi) {
        Vec3 q;
        if (qi < Q / 2) {
          q = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        } else {
          q = near[qi - Q / 2] + Vec3(rng.normal(0, 0.04), rng.normal(0, 0.04), rng.normal(0, 0.04));
          for (int a = 0; a < 3; ++a) q[a] = std::clamp(q[a], -0.5, 0.5);
        }
        labels(b * Q + qi, 0) = shape.contains(q) ? 1.0f : 0.0f;
        queries.push_back(q);
      }
    }
    Tape t(true);
    Node* z = ae.encode(t, surf, S);
    Node* logits = ae.decode(t, z, ae.query_features(queries), Q);
    Node* loss = t.bce_logits(logits, labels);
    detail::check_finite(loss->val(0, 0));
    rep.losses.push_back(loss->val(0, 0));
    t.backward(loss);
    opt.set_lr(detail::lr_for_step(cfg, step));
    opt.step();
  }
  ae.trained = true;
  return rep;
}

// ---------------------------------------------------------------------------
// scene-scale diffusion

struct ScaleTuple {
  Mat depth_rows;
  double s_gt = 1.0;
};

inline std::vector<ScaleTuple> build_scale_tuples(const ScaleModel& model, const DatasetManifest& man, int* H_out,
                                                  int* W_out) {
  std::vector<ScaleTuple> tuples;
  for (const auto& meta : man.records) {
    ViewRecord rec = meta;
    load_view_arrays(rec, man.root);
    ScaleTuple tup;
    tup.depth_rows = model.prepare_depth(rec.depth_est, H_out, W_out);
    tup.s_gt = rec.s_gt;
    tuples.push_back(std::move(tup));
  }
  return tuples;
}

inline TrainReport train_scale_model(ScaleModel& model, const std::vector<ScaleTuple>& tuples, int H, int W,
                                     const ddpm::Schedule& sched, const TrainConfig& cfg, std::uint64_t seed,
                                     nn::Adam& opt, int start_step = 0) {
  if (tuples.empty()) throw std::runtime_error("scale training: empty dataset");
  const long rows = static_cast<long>(H) * W;
  TrainReport rep;
  rep.param_kind = ddpm::ParamKind::Epsilon;
  for (int step = start_step; step < cfg.steps; ++step) {
    Rng rng(Rng::stream(seed, {streams::kTrain, 1 /*scale*/, static_cast<std::uint64_t>(step)}));
    const int B = std::min<int>(cfg.batch, tuples.size());
    Mat depth(B * rows, 1), s_t(B * rows, 1), eps(B * rows, 1), temb(B * rows, model.arch.temb);
    for (int b = 0; b < B; ++b) {
      const auto& tup = tuples[rng.uniform_index(tuples.size())];
      depth.middleRows(b * rows, rows) = tup.depth_rows;
      const int t = 1 + static_cast<int>(rng.uniform_index(sched.T));
      const double ab = sched.alpha_bar_at(t);
      const float x0 = (static_cast<float>(tup.s_gt) - model.arch.shift) / model.arch.spread;
      for (long r = 0; r < rows; ++r) {
        const float e = static_cast<float>(rng.normal());
        eps(b * rows + r, 0) = e;
        s_t(b * rows + r, 0) = static_cast<float>(std::sqrt(ab) * x0 + std::sqrt(1 - ab) * e);
      }
      temb.middleRows(b * rows, rows).rowwise() = nn::timestep_embedding(t, sched.T, model.arch.temb / 2).row(0);
    }
    Tape t(true);
    Node* feats = model.features.forward(t, t.constant(depth), B, H, W);
    Node* pred = model.denoise(t, t.constant(s_t), feats, t.constant(temb), B, H, W);
    Node* loss = t.l1_to(pred, eps);
    detail::check_finite(loss->val(0, 0));
    rep.losses.push_back(loss->val(0, 0));
    t.backward(loss);
    opt.set_lr(detail::lr_for_step(cfg, step));
    opt.step();
  }
  model.trained = true;
  return rep;
}

// ---------------------------------------------------------------------------
// NOC (alignment) diffusion

struct NocTuple {
  Mat centered, abs_xyz;  // [N, 3]
  Mat noc;                // [N, 3] canonical targets
  std::shared_ptr<Eigen::MatrixXi> knn;  // local indices
};

constexpr int kNocPoints = 1024;

// Conditioning cloud: back-projected estimated depth over the object mask,
// rescaled into metric space by the view's scale offset; targets come from the
// aligned NOC channel.
inline std::optional<NocTuple> make_noc_tuple(const ViewRecord& rec, const ObjectRecord& obj, int knn_k,
                                              std::uint64_t seed, int min_pixels = 40) {
  if (obj.visible_px < min_pixels) return std::nullopt;
  PointCloud pc = backproject(rec.depth_est, rec.mask, rec.intrinsics, static_cast<std::uint16_t>(obj.instance_id));
  if (pc.size() < 4) return std::nullopt;
  for (auto& p : pc.points) p /= rec.s_gt;
  const PointCloud sub = subsample_points(pc, kNocPoints, seed);

  NocTuple tup;
  cloud_to_mats(sub, &tup.centered, &tup.abs_xyz);
  tup.noc.resize(kNocPoints, 3);
  const int W = rec.noc.width();
  for (int i = 0; i < kNocPoints; ++i) {
    const int u = sub.pixel_index[i] % W, v = sub.pixel_index[i] / W;
    for (int a = 0; a < 3; ++a) tup.noc(i, a) = rec.noc.at(u, v, a);
  }
  tup.knn = knn_indices(tup.centered, knn_k);
  return tup;
}

inline std::vector<NocTuple> build_noc_tuples(const NocModel& model, const DatasetManifest& man, std::uint64_t seed) {
  std::vector<NocTuple> tuples;
  for (std::size_t vi = 0; vi < man.records.size(); ++vi) {
    ViewRecord rec = man.records[vi];
    load_view_arrays(rec, man.root);
    for (std::size_t oi = 0; oi < rec.objects.size(); ++oi) {
      auto tup = make_noc_tuple(rec, rec.objects[oi], model.arch.knn,
                                Rng::stream(seed, {streams::kSubsample, vi, oi}));
      if (tup) tuples.push_back(std::move(*tup));
    }
  }
  return tuples;
}

inline TrainReport train_noc_model(NocModel& model, const std::vector<NocTuple>& tuples, const ddpm::Schedule& sched,
                                   const TrainConfig& cfg, std::uint64_t seed, nn::Adam& opt, int start_step = 0) {
  if (tuples.empty()) throw std::runtime_error("noc training: empty dataset");
  const int N = kNocPoints;
  TrainReport rep;
  rep.param_kind = ddpm::ParamKind::Epsilon;
  for (int step = start_step; step < cfg.steps; ++step) {
    Rng rng(Rng::stream(seed, {streams::kTrain, 2 /*noc*/, static_cast<std::uint64_t>(step)}));
    const int B = std::min<int>(cfg.batch, tuples.size());
    Mat centered(B * N, 3), abs_xyz(B * N, 3), x_t(B * N, 3), eps(B * N, 3), temb(B * N, model.arch.temb);
    auto idx = std::make_shared<Eigen::MatrixXi>(B * N, model.arch.knn);
    for (int b = 0; b < B; ++b) {
      const auto& tup = tuples[rng.uniform_index(tuples.size())];
      centered.middleRows(b * N, N) = tup.centered;
      abs_xyz.middleRows(b * N, N) = tup.abs_xyz;
      idx->middleRows(b * N, N) = tup.knn->array() + b * N;
      const int t = 1 + static_cast<int>(rng.uniform_index(sched.T));
      const double ab = sched.alpha_bar_at(t);
      for (int r = 0; r < N; ++r)
        for (int a = 0; a < 3; ++a) {
          const float e = static_cast<float>(rng.normal());
          const float x0 = tup.noc(r, a) / model.arch.noc_spread;
          eps(b * N + r, a) = e;
          x_t(b * N + r, a) = static_cast<float>(std::sqrt(ab) * x0 + std::sqrt(1 - ab) * e);
        }
      temb.middleRows(b * N, N).rowwise() = nn::timestep_embedding(t, sched.T, model.arch.temb / 2).row(0);
    }
    Tape t(true);
    Node* feats = model.features.forward(t, centered, abs_xyz, N, idx);
    Node* pred = model.denoise(t, t.constant(x_t), feats, t.constant(temb), N);
    Node* loss = t.l1_to(pred, eps);
    detail::check_finite(loss->val(0, 0));
    rep.losses.push_back(loss->val(0, 0));
    t.backward(loss);
    opt.set_lr(detail::lr_for_step(cfg, step));
    opt.step();
  }
  model.trained = true;
  return rep;
}

// ---------------------------------------------------------------------------
// latent (retrieval) diffusion

struct LatentTuple {
  Mat trig_ctx;   // [n_ctx, 48]
  Mat z0;         // [1, d], normalized
};

// NOC evidence for an object: the ground-truth NOC pixels over its mask.
inline NOCSet noc_set_from_view(const ViewRecord& rec, int instance_id) {
  std::vector<Vec3> coords;
  for (int v = 0; v < rec.mask.height(); ++v)
    for (int u = 0; u < rec.mask.width(); ++u)
      if (rec.mask.at(u, v) == instance_id)
        coords.emplace_back(rec.noc.at(u, v, 0), rec.noc.at(u, v, 1), rec.noc.at(u, v, 2));
  return NOCSet::from_clamped(std::move(coords));
}

// Raw shape codes from the trained autoencoder, plus the per-dimension
// normalization the diffusion works in.
inline void fit_latent_normalization(LatentModel& model, const Mat& codes) {
  model.z_mean = codes.colwise().mean();
  Mat centered = codes.rowwise() - model.z_mean.row(0);
  model.z_std = (centered.array().square().colwise().mean().sqrt() + 1e-4f).matrix();
}

inline std::vector<LatentTuple> build_latent_tuples(LatentModel& model, ShapeAutoencoder& ae,
                                                    const std::vector<ShapeModel>& db, const DatasetManifest& man,
                                                    std::uint64_t seed, int min_pixels = 40) {
  std::map<int, int> row_of_shape;
  Mat codes(static_cast<long>(db.size()), model.arch.latent_dim);
  for (std::size_t i = 0; i < db.size(); ++i) {
    codes.row(static_cast<long>(i)) = ae.shape_encode(db[i]).transpose();
    row_of_shape[db[i].id] = static_cast<int>(i);
  }
  fit_latent_normalization(model, codes);

  std::vector<LatentTuple> tuples;
  for (std::size_t vi = 0; vi < man.records.size(); ++vi) {
    ViewRecord rec = man.records[vi];
    load_view_arrays(rec, man.root);
    for (std::size_t oi = 0; oi < rec.objects.size(); ++oi) {
      const auto& obj = rec.objects[oi];
      if (obj.visible_px < min_pixels) continue;
      const NOCSet nocs = noc_set_from_view(rec, obj.instance_id);
      if (nocs.empty()) continue;
      LatentTuple tup;
      tup.trig_ctx = model.trig_context(nocs, Rng::stream(seed, {streams::kSubsample, vi, oi, 7}));
      tup.z0 = model.normalize_code(codes.row(row_of_shape.at(obj.shape_id)));
      tuples.push_back(std::move(tup));
    }
  }
  return tuples;
}

inline TrainReport train_latent_model(LatentModel& model, const std::vector<LatentTuple>& tuples,
                                      const ddpm::Schedule& sched, const TrainConfig& cfg, std::uint64_t seed,
                                      nn::Adam& opt, int start_step = 0) {
  if (tuples.empty()) throw std::runtime_error("latent training: empty dataset");
  const int d = model.arch.latent_dim;
  const int n_ctx = model.arch.context_points;
  TrainReport rep;
  rep.param_kind = ddpm::ParamKind::X0;
  for (int step = start_step; step < cfg.steps; ++step) {
    Rng rng(Rng::stream(seed, {streams::kTrain, 3 /*latent*/, static_cast<std::uint64_t>(step)}));
    const int B = std::min<int>(cfg.batch, tuples.size());
    Mat z_t(B, d), x0(B, d), temb(B, model.arch.temb), trig(B * n_ctx, kTrigFeatures);
    for (int b = 0; b < B; ++b) {
      const auto& tup = tuples[rng.uniform_index(tuples.size())];
      trig.middleRows(b * n_ctx, n_ctx) = tup.trig_ctx;
      x0.row(b) = tup.z0.row(0);
      const int t = 1 + static_cast<int>(rng.uniform_index(sched.T));
      const double ab = sched.alpha_bar_at(t);
      for (int a = 0; a < d; ++a)
        z_t(b, a) = static_cast<float>(std::sqrt(ab) * x0(b, a) + std::sqrt(1 - ab) * rng.normal());
      temb.row(b) = nn::timestep_embedding(t, sched.T, model.arch.temb / 2).row(0);
    }
    Tape t(true);
    Node* pred = model.denoise(t, t.constant(z_t), t.constant(temb), trig);
    Node* loss = t.l1_to(pred, x0);
    detail::check_finite(loss->val(0, 0));
    rep.losses.push_back(loss->val(0, 0));
    t.backward(loss);
    opt.set_lr(detail::lr_for_step(cfg, step));
    opt.step();
  }
  model.trained = true;
  return rep;
}

}  // namespace cadalign::models
