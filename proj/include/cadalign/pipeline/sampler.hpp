#pragma once

#include <functional>

#include "cadalign/geometry/ransac.hpp"
#include "cadalign/models/checkpoint.hpp"
#include "cadalign/models/train.hpp"
#include "cadalign/pipeline/hypothesis.hpp"
#include "cadalign/retrieval/index.hpp"

namespace cadalign {

// Injectable sampling seams: the production implementations wrap the trained
// diffusion models, tests can substitute oracles (e.g. ground-truth NOCs) to
// exercise the solver and ranking in isolation.
using NocSamplerFn = std::function<NOCSet(const PointCloud&, std::uint64_t seed)>;
using LatentSamplerFn = std::function<Eigen::VectorXf(const NOCSet&, std::uint64_t seed)>;
using ScaleSamplerFn = std::function<std::vector<double>(const DepthMap&, int n, std::uint64_t seed)>;

struct SrsParams {
  double mu = 1.0;
  double sigma = 0.1;

  void validate() const {
    if (!(sigma > 0)) throw std::invalid_argument("srs: sigma must be positive");
  }
};

// Gaussian baseline fit to the train-split scale offsets (sample mean and
// sample standard deviation over the manifest's per-view values).
inline SrsParams estimate_srs_params(const DatasetManifest& train) {
  if (train.records.empty()) throw std::invalid_argument("srs: empty manifest");
  double mean = 0;
  for (const auto& r : train.records) mean += r.s_gt;
  mean /= static_cast<double>(train.records.size());
  double var = 0;
  for (const auto& r : train.records) var += (r.s_gt - mean) * (r.s_gt - mean);
  var /= std::max<std::size_t>(1, train.records.size() - 1);
  SrsParams p;
  p.mu = mean;
  p.sigma = std::max(1e-9, std::sqrt(var));
  return p;
}

inline std::vector<double> srs_sample_scales(const SrsParams& params, int n, std::uint64_t seed) {
  params.validate();
  Rng rng(Rng::stream(seed, {streams::kSrs}));
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(std::max(1e-3, rng.normal(params.mu, params.sigma)));
  return out;
}

inline DepthMap rescale_depth(const DepthMap& depth, double s) {
  if (!(s > 0)) throw std::invalid_argument("rescale_depth: scale must be positive");
  DepthMap out = depth;
  for (auto& d : out.raw()) d /= s;
  return out;
}

// ---------------------------------------------------------------------------

struct ReconstructConfig {
  int n_scales = 8;
  int m_candidates = 8;
  RansacParams solver;
  int stride = 1;  // reverse-chain stride for all three diffusion models
  int points = 1024;
};

// All trained components the cascade needs.
struct TrainedPipeline {
  models::ScaleModel scale;
  ddpm::Schedule scale_sched;
  models::NocModel noc;
  ddpm::Schedule noc_sched;
  models::LatentModel latent;
  ddpm::Schedule latent_sched;
  models::ShapeAutoencoder ae;
  LatentIndex index;

  NocSamplerFn noc_sampler(int stride) {
    return [this, stride](const PointCloud& pc, std::uint64_t seed) {
      return noc.sample_noc(pc, noc_sched, seed, stride);
    };
  }
  LatentSamplerFn latent_sampler(int stride) {
    return [this, stride](const NOCSet& nocs, std::uint64_t seed) {
      return Eigen::VectorXf(latent.sample_latent(nocs, latent_sched, seed, stride).row(0).transpose());
    };
  }
  ScaleSamplerFn scale_sampler(int stride) {
    return [this, stride](const DepthMap& d, int n, std::uint64_t seed) {
      return scale.sample_scales(d, scale_sched, n, seed, stride);
    };
  }
};

// Candidate generation for one object at one metric-rescaled depth map:
// subsample the back-projected cloud, then per slot sample a NOC set, solve
// the 9-DoF pose and sample/retrieve a latent. Solver failures drop the slot.
struct ObjectCandidates {
  std::vector<Candidate> candidates;
  std::vector<NOCSet> nocs;                 // per surviving candidate
  std::vector<Eigen::VectorXf> latents;
  int drops = 0;
};

inline ObjectCandidates object_hypotheses(const NocSamplerFn& sample_noc, const LatentSamplerFn& sample_latent,
                                          const LatentIndex& index, const DepthMap& depth_i,
                                          const InstanceMask& mask, int instance_id, const CameraIntrinsics& K,
                                          int m, const RansacParams& solver, std::uint64_t seed, int points = 1024) {
  const PointCloud full = backproject(depth_i, mask, K, static_cast<std::uint16_t>(instance_id));
  if (full.empty()) throw std::runtime_error("object_hypotheses: empty mask");
  const PointCloud sub = subsample_points(full, points, Rng::mix(seed, 1));

  ObjectCandidates out;
  for (int slot = 0; slot < m; ++slot) {
    const std::uint64_t slot_seed = Rng::stream(seed, {streams::kNocSample, static_cast<std::uint64_t>(slot)});
    const NOCSet nocs = sample_noc(sub, slot_seed);
    Candidate cand;
    try {
      const auto res = ransac_pose_9dof(nocs, sub, solver, Rng::mix(slot_seed, streams::kRansac));
      cand.pose = res.pose;
    } catch (const std::exception&) {
      cand.dropped = true;
      out.candidates.push_back(cand);
      out.nocs.push_back(nocs);
      out.latents.emplace_back();
      ++out.drops;
      continue;
    }
    const Eigen::VectorXf z = sample_latent(nocs, Rng::mix(slot_seed, streams::kLatentSample));
    const auto hits = query_cosine(index, z, 1);
    cand.shape_id = hits[0].id;
    out.candidates.push_back(cand);
    out.nocs.push_back(nocs);
    out.latents.push_back(z);
  }
  if (out.drops == m) throw std::runtime_error("no valid hypothesis");
  return out;
}

// ---------------------------------------------------------------------------
// hypothesis ranking: render each candidate and compare normal maps

struct RankContext {
  const std::vector<ShapeModel>* db = nullptr;
  CameraIntrinsics K;
  const NormalMap* observed_normals = nullptr;
  const InstanceMask* observed_mask = nullptr;
  int instance_id = 0;
};

// Masked L1 between the observed normal map (over the object's visible mask)
// and a candidate's rendered normal map, normalized over the union support.
// Pixels covered on one side only compare against the zero vector.
inline double normal_map_score(const RankContext& ctx, const GBuffer& render) {
  const int W = ctx.K.width, H = ctx.K.height;
  double sum = 0;
  long support = 0;
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const bool obs = ctx.observed_mask->at(u, v) == ctx.instance_id;
      const bool ren = render.mask.at(u, v) != 0;
      if (!obs && !ren) continue;
      ++support;
      for (int a = 0; a < 3; ++a) {
        const double o = obs ? ctx.observed_normals->at(u, v, a) : 0.0;
        const double r = ren ? render.normal.at(u, v, a) : 0.0;
        sum += std::abs(o - r);
      }
    }
  return support == 0 ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(support);
}

inline GBuffer render_candidate(const std::vector<ShapeModel>& db, int shape_id, const Pose9& pose,
                                const CameraIntrinsics& K) {
  GBuffer g = make_gbuffer(K, CameraExtrinsics{});
  for (const auto& s : db)
    if (s.id == shape_id) {
      raster::rasterize_mesh(s.mesh, pose.as_affine(), 1, g);
      break;
    }
  finalize_gbuffer(g);
  return g;
}

// Scores every surviving candidate and selects the minimizer (ties keep the
// lower index). If every candidate renders empty, candidate 0 is returned
// with the fallback flag set.
inline void rank_hypotheses(ObjectCandidates& cands, const RankContext& ctx, ObjectHypothesis& out) {
  out.winner = -1;
  out.rank_fallback = false;
  double best = std::numeric_limits<double>::infinity();
  bool any_rendered = false;
  for (std::size_t i = 0; i < cands.candidates.size(); ++i) {
    Candidate& c = cands.candidates[i];
    if (c.dropped) continue;
    const GBuffer render = render_candidate(*ctx.db, c.shape_id, c.pose, ctx.K);
    bool empty = true;
    for (auto m : render.mask.raw())
      if (m) {
        empty = false;
        break;
      }
    c.rank_score = empty ? std::numeric_limits<double>::infinity() : normal_map_score(ctx, render);
    if (!empty) any_rendered = true;
    if (c.rank_score < best) {
      best = c.rank_score;
      out.winner = static_cast<int>(i);
    }
  }
  if (out.winner < 0) {
    // all renders empty (or everything dropped upstream handled elsewhere)
    for (std::size_t i = 0; i < cands.candidates.size(); ++i)
      if (!cands.candidates[i].dropped) {
        out.winner = static_cast<int>(i);
        break;
      }
    out.rank_fallback = !any_rendered;
  }
  out.candidates = cands.candidates;
  if (out.winner >= 0 && !cands.latents[out.winner].size()) out.winner_latent = Eigen::VectorXf();
  if (out.winner >= 0) out.winner_latent = cands.latents[out.winner];
}

// ---------------------------------------------------------------------------
// full cascade for one view

// Runs scale sampling, per-scale candidate generation, pose solving and
// ranking. Returns exactly n hypotheses (one ranked winner set per scale),
// prefix-nested in both the scale list and the candidate slots.
inline ViewHypotheses reconstruct(const ViewRecord& rec, const NocSamplerFn& sample_noc,
                                  const LatentSamplerFn& sample_latent, const ScaleSamplerFn& sample_scales,
                                  const LatentIndex& index, const std::vector<ShapeModel>& db,
                                  const ReconstructConfig& cfg, std::uint64_t view_seed) {
  ViewHypotheses out;
  out.view_container = rec.container;
  out.view_index = rec.view_index;
  out.diffusion_scales = sample_scales(rec.depth_est, cfg.n_scales, view_seed);

  for (int si = 0; si < cfg.n_scales; ++si) {
    const double s = out.diffusion_scales[si];
    const DepthMap depth_i = rescale_depth(rec.depth_est, s);
    Hypothesis hyp;
    hyp.scene_scale = s;
    for (std::size_t oi = 0; oi < rec.objects.size(); ++oi) {
      const auto& obj = rec.objects[oi];
      ObjectHypothesis oh;
      oh.instance_id = obj.instance_id;
      try {
        auto cands = object_hypotheses(sample_noc, sample_latent, index, depth_i, rec.mask, obj.instance_id,
                                       rec.intrinsics, cfg.m_candidates, cfg.solver,
                                       Rng::stream(view_seed, {static_cast<std::uint64_t>(si), oi}), cfg.points);
        RankContext ctx;
        ctx.db = &db;
        ctx.K = rec.intrinsics;
        ctx.observed_normals = &rec.normal;
        ctx.observed_mask = &rec.mask;
        ctx.instance_id = obj.instance_id;
        rank_hypotheses(cands, ctx, oh);
      } catch (const std::exception&) {
        oh.winner = -1;  // recorded failure for this object at this scale
      }
      hyp.objects.push_back(std::move(oh));
    }
    out.hypotheses.push_back(std::move(hyp));
  }
  return out;
}

}  // namespace cadalign
