#pragma once

#include <json.hpp>
#include <optional>
#include <vector>

#include "cadalign/synth/dataset.hpp"

namespace cadalign {

// One pose/shape candidate for an object at a fixed scene scale.
struct Candidate {
  int shape_id = -1;
  Pose9 pose;
  double rank_score = std::numeric_limits<double>::infinity();  // masked normal-map L1
  bool dropped = false;  // pose solver found no consensus
};

// Per-object result at one scene scale: the ranked winner plus the full
// candidate list (prefix-nested in the candidate slot index).
struct ObjectHypothesis {
  int instance_id = 0;
  std::vector<Candidate> candidates;
  int winner = -1;                 // index into candidates, -1 if all dropped
  Eigen::VectorXf winner_latent;   // sampled latent of the winner
  bool rank_fallback = false;      // every candidate rendered empty
};

// One scene-level hypothesis: a scale and the per-object winners at it.
struct Hypothesis {
  double scene_scale = 1.0;
  std::vector<ObjectHypothesis> objects;
};

// Everything the evaluation stage needs for one view.
struct ViewHypotheses {
  std::string view_container;  // record identity within the split
  int view_index = 0;
  std::vector<double> diffusion_scales;  // prefix-nested sample list
  std::vector<double> srs_scales;        // baseline sampler, same length
  std::vector<Hypothesis> hypotheses;    // one per diffusion scale
};

namespace detail {

inline json candidate_to_json(const Candidate& c) {
  json j = pose_to_json(c.pose);
  j["shape_id"] = c.shape_id;
  j["score"] = c.rank_score;
  j["dropped"] = c.dropped;
  return j;
}

inline Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.pose = pose_from_json(j);
  c.shape_id = j.at("shape_id");
  c.rank_score = j.at("score");
  c.dropped = j.at("dropped");
  return c;
}

}  // namespace detail

inline json view_hypotheses_to_json(const ViewHypotheses& v) {
  json j;
  j["view_container"] = v.view_container;
  j["view_index"] = v.view_index;
  j["diffusion_scales"] = v.diffusion_scales;
  j["srs_scales"] = v.srs_scales;
  j["hypotheses"] = json::array();
  for (const auto& h : v.hypotheses) {
    json hj;
    hj["scene_scale"] = h.scene_scale;
    hj["objects"] = json::array();
    for (const auto& o : h.objects) {
      json oj;
      oj["instance_id"] = o.instance_id;
      oj["winner"] = o.winner;
      oj["rank_fallback"] = o.rank_fallback;
      oj["candidates"] = json::array();
      for (const auto& c : o.candidates) oj["candidates"].push_back(detail::candidate_to_json(c));
      std::vector<double> z(o.winner_latent.size());
      for (long i = 0; i < o.winner_latent.size(); ++i) z[i] = o.winner_latent(i);
      oj["winner_latent"] = z;
      hj["objects"].push_back(oj);
    }
    j["hypotheses"].push_back(hj);
  }
  return j;
}

inline ViewHypotheses view_hypotheses_from_json(const json& j) {
  ViewHypotheses v;
  v.view_container = j.at("view_container");
  v.view_index = j.at("view_index");
  v.diffusion_scales = j.at("diffusion_scales").get<std::vector<double>>();
  v.srs_scales = j.at("srs_scales").get<std::vector<double>>();
  for (const auto& hj : j.at("hypotheses")) {
    Hypothesis h;
    h.scene_scale = hj.at("scene_scale");
    for (const auto& oj : hj.at("objects")) {
      ObjectHypothesis o;
      o.instance_id = oj.at("instance_id");
      o.winner = oj.at("winner");
      o.rank_fallback = oj.at("rank_fallback");
      for (const auto& cj : oj.at("candidates")) o.candidates.push_back(detail::candidate_from_json(cj));
      const auto z = oj.at("winner_latent").get<std::vector<double>>();
      o.winner_latent.resize(static_cast<long>(z.size()));
      for (std::size_t i = 0; i < z.size(); ++i) o.winner_latent(static_cast<long>(i)) = static_cast<float>(z[i]);
      h.objects.push_back(std::move(o));
    }
    v.hypotheses.push_back(std::move(h));
  }
  return v;
}

}  // namespace cadalign
