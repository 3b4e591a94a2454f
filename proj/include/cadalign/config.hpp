#pragma once

#include <cstdlib>

#include "cadalign/eval/report.hpp"
#include "cadalign/models/checkpoint.hpp"
#include "cadalign/models/train.hpp"
#include "cadalign/pipeline/sampler.hpp"

namespace cadalign {

// One config drives every stage; flags override fields, profiles override
// groups of fields. Documented in docs/CONFIG.md.
struct PipelineConfig {
  std::string data_root = "data";
  std::uint64_t seed = 1;
  std::string profile = "default";

  DatasetGenConfig gen;          // train split geometry + corruption
  int test_scenes = 12;
  int test_views_per_scene = 2;

  models::DiffusionSpec diffusion{1000, 1e-4, 0.02, "linear"};
  models::ScaleModelArch scale_arch;
  models::NocModelArch noc_arch;
  models::LatentModelArch latent_arch;
  models::ShapeAEArch ae_arch;

  models::TrainConfig train_scale{2500, 8, 1.5e-3f, 0.7f};
  models::TrainConfig train_noc{2500, 6, 1.5e-3f, 0.7f};
  models::TrainConfig train_latent{2500, 16, 1.5e-3f, 0.7f};
  models::TrainConfig train_ae{2500, 8, 2e-3f, 0.7f};

  ReconstructConfig sampling;    // n, m, solver params, stride, points
  eval::EvalConfig eval;

  json to_json() const {
    json j;
    j["data_root"] = data_root;
    j["seed"] = seed;
    j["profile"] = profile;
    j["gen"] = gen.to_json();
    j["test_scenes"] = test_scenes;
    j["test_views_per_scene"] = test_views_per_scene;
    j["diffusion"] = diffusion.to_json();
    j["scale_arch"] = scale_arch.to_json();
    j["noc_arch"] = noc_arch.to_json();
    j["latent_arch"] = latent_arch.to_json();
    j["ae_arch"] = ae_arch.to_json();
    auto tc = [](const models::TrainConfig& t) {
      return json{{"steps", t.steps}, {"batch", t.batch}, {"lr", t.lr}, {"lr_drop_at", t.lr_drop_at}};
    };
    j["train"] = {{"scale", tc(train_scale)}, {"noc", tc(train_noc)}, {"latent", tc(train_latent)}, {"shape_ae", tc(train_ae)}};
    j["sampling"] = {{"n_scales", sampling.n_scales},
                     {"m_candidates", sampling.m_candidates},
                     {"stride", sampling.stride},
                     {"points", sampling.points},
                     {"solver",
                      {{"confidence", sampling.solver.confidence},
                       {"inlier_threshold", sampling.solver.inlier_threshold},
                       {"num_trials", sampling.solver.num_trials},
                       {"minimal_set_size", sampling.solver.minimal_set_size}}}};
    j["eval"] = {{"topn_list", eval.topn_list},
                 {"report_n", eval.report_n},
                 {"chamfer_points", eval.chamfer_points},
                 {"chamfer_seed", eval.chamfer_seed},
                 {"thresholds",
                  {{"translation_m", eval.thresholds.translation_m},
                   {"rotation_deg", eval.thresholds.rotation_deg},
                   {"scale_ratio", eval.thresholds.scale_ratio},
                   {"scale_ratio_mean_over_axes", eval.thresholds.scale_ratio_mean_over_axes}}}};
    return j;
  }

  std::string hash() const { return hash_string_hex(to_json().dump()); }

  void apply_json(const json& j);
  void validate() const;
};

inline void PipelineConfig::apply_json(const json& j) {
  if (j.contains("data_root")) data_root = j.at("data_root");
  if (j.contains("seed")) seed = j.at("seed");
  if (j.contains("profile")) profile = j.at("profile");
  if (j.contains("test_scenes")) test_scenes = j.at("test_scenes");
  if (j.contains("test_views_per_scene")) test_views_per_scene = j.at("test_views_per_scene");
  if (j.contains("gen")) {
    const auto& g = j.at("gen");
    if (g.contains("scenes")) gen.scenes = g.at("scenes");
    if (g.contains("views_per_scene")) gen.views_per_scene = g.at("views_per_scene");
    if (g.contains("shapes_per_category")) gen.shapes_per_category = g.at("shapes_per_category");
    if (g.contains("augment_fraction")) gen.augment_fraction = g.at("augment_fraction");
    if (g.contains("width")) gen.width = g.at("width");
    if (g.contains("height")) gen.height = g.at("height");
    if (g.contains("layout")) {
      const auto& l = g.at("layout");
      if (l.contains("min_objects")) gen.layout.min_objects = l.at("min_objects");
      if (l.contains("max_objects")) gen.layout.max_objects = l.at("max_objects");
      if (l.contains("position_range")) gen.layout.position_range = l.at("position_range");
    }
    if (g.contains("depth_bias")) {
      const auto& d = g.at("depth_bias");
      if (d.contains("log_mu")) gen.depth_bias.log_mu = d.at("log_mu");
      if (d.contains("log_sigma")) gen.depth_bias.log_sigma = d.at("log_sigma");
      if (d.contains("field_amplitude")) gen.depth_bias.field_amplitude = d.at("field_amplitude");
      if (d.contains("noise_sigma")) gen.depth_bias.noise_sigma = d.at("noise_sigma");
    }
    if (g.contains("view")) {
      const auto& v = g.at("view");
      if (v.contains("min_coverage")) gen.view.min_coverage = v.at("min_coverage");
      if (v.contains("attempts_per_view")) gen.view.attempts_per_view = v.at("attempts_per_view");
    }
  }
  if (j.contains("diffusion")) diffusion = models::DiffusionSpec::from_json(j.at("diffusion"));
  if (j.contains("scale_arch")) scale_arch = models::ScaleModelArch::from_json(j.at("scale_arch"));
  if (j.contains("noc_arch")) noc_arch = models::NocModelArch::from_json(j.at("noc_arch"));
  if (j.contains("latent_arch")) latent_arch = models::LatentModelArch::from_json(j.at("latent_arch"));
  if (j.contains("ae_arch")) ae_arch = models::ShapeAEArch::from_json(j.at("ae_arch"));
  auto rd_tc = [&](const char* key, models::TrainConfig& t) {
    if (!j.contains("train") || !j.at("train").contains(key)) return;
    const auto& c = j.at("train").at(key);
    if (c.contains("steps")) t.steps = c.at("steps");
    if (c.contains("batch")) t.batch = c.at("batch");
    if (c.contains("lr")) t.lr = c.at("lr");
    if (c.contains("lr_drop_at")) t.lr_drop_at = c.at("lr_drop_at");
  };
  rd_tc("scale", train_scale);
  rd_tc("noc", train_noc);
  rd_tc("latent", train_latent);
  rd_tc("shape_ae", train_ae);
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    if (s.contains("n_scales")) sampling.n_scales = s.at("n_scales");
    if (s.contains("m_candidates")) sampling.m_candidates = s.at("m_candidates");
    if (s.contains("stride")) sampling.stride = s.at("stride");
    if (s.contains("points")) sampling.points = s.at("points");
    if (s.contains("solver")) {
      const auto& r = s.at("solver");
      if (r.contains("confidence")) sampling.solver.confidence = r.at("confidence");
      if (r.contains("inlier_threshold")) sampling.solver.inlier_threshold = r.at("inlier_threshold");
      if (r.contains("num_trials")) sampling.solver.num_trials = r.at("num_trials");
      if (r.contains("minimal_set_size")) sampling.solver.minimal_set_size = r.at("minimal_set_size");
    }
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    if (e.contains("topn_list")) eval.topn_list = e.at("topn_list").get<std::vector<int>>();
    if (e.contains("report_n")) eval.report_n = e.at("report_n");
    if (e.contains("chamfer_points")) eval.chamfer_points = e.at("chamfer_points");
    if (e.contains("chamfer_seed")) eval.chamfer_seed = e.at("chamfer_seed");
    if (e.contains("thresholds")) {
      const auto& t = e.at("thresholds");
      if (t.contains("translation_m")) eval.thresholds.translation_m = t.at("translation_m");
      if (t.contains("rotation_deg")) eval.thresholds.rotation_deg = t.at("rotation_deg");
      if (t.contains("scale_ratio")) eval.thresholds.scale_ratio = t.at("scale_ratio");
      if (t.contains("scale_ratio_mean_over_axes"))
        eval.thresholds.scale_ratio_mean_over_axes = t.at("scale_ratio_mean_over_axes");
    }
  }
}

// CI-grade smoke profile: small renders, short schedules, strided inference.
inline void apply_tiny_profile(PipelineConfig& cfg) {
  cfg.profile = "tiny";
  cfg.gen.scenes = 50;
  cfg.gen.views_per_scene = 3;
  cfg.gen.shapes_per_category = 10;
  cfg.gen.width = 64;
  cfg.gen.height = 48;
  cfg.gen.layout.min_objects = 1;
  cfg.gen.layout.max_objects = 2;
  cfg.test_scenes = 12;
  cfg.test_views_per_scene = 2;
  cfg.diffusion = models::DiffusionSpec{200, 1e-4, 0.05, "linear"};
  cfg.scale_arch.feat_width = 6;
  cfg.scale_arch.feat_channels = 6;
  cfg.scale_arch.unet_width = 8;
  cfg.scale_arch.downsample = 2;
  cfg.noc_arch.feat_width = 40;
  cfg.noc_arch.feat_channels = 40;
  cfg.noc_arch.width = 56;
  cfg.latent_arch.latent_dim = 48;
  cfg.latent_arch.context_width = 256;
  cfg.latent_arch.context_points = 96;
  cfg.latent_arch.width = 96;
  cfg.ae_arch.latent_dim = 48;
  cfg.ae_arch.width = 128;
  cfg.ae_arch.surface_points = 256;
  cfg.train_scale = models::TrainConfig{1200, 6, 2e-3f, 0.7f};
  cfg.train_noc = models::TrainConfig{1400, 4, 2e-3f, 0.7f};
  cfg.train_latent = models::TrainConfig{1500, 16, 2e-3f, 0.7f};
  cfg.train_ae = models::TrainConfig{1500, 8, 2e-3f, 0.7f};
  cfg.sampling.n_scales = 20;
  cfg.sampling.m_candidates = 8;
  cfg.sampling.stride = 10;
  cfg.eval.chamfer_points = 4096;
}

inline PipelineConfig make_config(const std::string& profile) {
  PipelineConfig cfg;
  if (profile == "tiny") {
    apply_tiny_profile(cfg);
  } else if (profile != "default") {
    throw std::invalid_argument("unknown profile: " + profile);
  }
  return cfg;
}

inline void PipelineConfig::validate() const {
  if (gen.scenes < 1 || gen.views_per_scene < 1) throw std::invalid_argument("config: scene counts must be positive");
  if (gen.width % 4 || gen.height % 4) throw std::invalid_argument("config: render dims must be divisible by 4");
  if (gen.shapes_per_category < 1) throw std::invalid_argument("config: shapes_per_category must be positive");
  sampling.solver.validate();
  gen.depth_bias.validate();
  const auto sched = diffusion.schedule();
  if (!sched.terminal_is_gaussian())
    throw std::invalid_argument("config: diffusion schedule must reach alpha_bar_T < 0.01");
  if (sampling.n_scales < 1 || sampling.m_candidates < 1)
    throw std::invalid_argument("config: sampling counts must be positive");
  for (int n : eval.topn_list)
    if (n < 1) throw std::invalid_argument("config: topn entries must be >= 1");
}

// env override hook for the data root
inline std::string data_root_from_env(const std::string& fallback) {
  const char* env = std::getenv("CADALIGN_DATA_ROOT");
  return env && *env ? std::string(env) : fallback;
}

}  // namespace cadalign
