#pragma once

#include <map>
#include <optional>

#include "cadalign/eval/metrics.hpp"
#include "cadalign/pipeline/hypothesis.hpp"
#include "cadalign/retrieval/chamfer.hpp"

namespace cadalign::eval {

struct EvalConfig {
  std::vector<int> topn_list = {1, 8, 12, 16, 20};
  int report_n = 8;  // hypothesis count for the metric-error table
  AlignmentThresholds thresholds;
  int chamfer_points = 10000;
  std::uint64_t chamfer_seed = 7;
  std::map<std::string, SymmetryClass> symmetry;  // per category, default None

  SymmetryClass symmetry_of(const std::string& category) const {
    auto it = symmetry.find(category);
    return it == symmetry.end() ? SymmetryClass::None : it->second;
  }
};

// One object's ground truth paired with its per-scale winners.
struct EvalObject {
  std::string category;
  Pose9 gt_pose;
  int gt_shape = -1;
  double s_gt = 1.0;
  std::vector<std::optional<Candidate>> winners;  // index = scale/hypothesis rank
  std::vector<Eigen::VectorXf> winner_latents;    // same indexing, may be empty
  std::vector<double> diffusion_scales;
  std::vector<double> srs_scales;
  std::vector<Candidate> first_scale_candidates;  // nested-m retrieval checks
};

struct CategoryRow {
  std::map<std::string, double> by_category;
  double average = 0;

  void finalize() {
    average = 0;
    for (const auto& [_, v] : by_category) average += v;
    if (!by_category.empty()) average /= static_cast<double>(by_category.size());
  }
};

struct EvalReport {
  json meta;
  std::map<int, CategoryRow> alignment_accuracy;      // percent, by top-n
  std::map<int, CategoryRow> retrieval_min;           // Chamfer, by top-n
  std::map<int, CategoryRow> retrieval_avg;
  std::map<int, CategoryRow> scale_error_diffusion;   // e_s, by top-n
  std::map<int, CategoryRow> scale_error_srs;
  CategoryRow metric_translation_cm, metric_rotation_deg, metric_scale_err;  // at report_n
  double confidence_min_chamfer_full = 0, confidence_min_chamfer_kept = 0;
  int confidence_kept = 0, confidence_total = 0;
  json to_json() const;
};

// Pairs the test-split ground truth with serialized hypotheses.
inline std::vector<EvalObject> collect_eval_objects(const DatasetManifest& test,
                                                    const std::vector<ViewHypotheses>& hyps) {
  std::map<std::string, const ViewHypotheses*> by_container;
  for (const auto& h : hyps) by_container[h.view_container] = &h;

  std::vector<EvalObject> out;
  for (const auto& rec : test.records) {
    const auto it = by_container.find(rec.container);
    if (it == by_container.end()) continue;
    const ViewHypotheses& vh = *it->second;
    for (const auto& obj : rec.objects) {
      EvalObject eo;
      eo.category = obj.category;
      eo.gt_pose = obj.pose;
      eo.gt_shape = obj.shape_id;
      eo.s_gt = obj.s_gt;
      eo.diffusion_scales = vh.diffusion_scales;
      eo.srs_scales = vh.srs_scales;
      for (std::size_t si = 0; si < vh.hypotheses.size(); ++si) {
        std::optional<Candidate> winner;
        Eigen::VectorXf latent;
        for (const auto& oh : vh.hypotheses[si].objects) {
          if (oh.instance_id != obj.instance_id) continue;
          if (oh.winner >= 0) {
            winner = oh.candidates[oh.winner];
            latent = oh.winner_latent;
            if (si == 0) eo.first_scale_candidates = oh.candidates;
          }
          break;
        }
        eo.winners.push_back(winner);
        eo.winner_latents.push_back(latent);
      }
      out.push_back(std::move(eo));
    }
  }
  return out;
}

// Point clouds for retrieval similarity, sampled once per shape.
class ChamferCache {
 public:
  ChamferCache(const std::vector<ShapeModel>& db, int points, std::uint64_t seed) : points_(points), seed_(seed) {
    for (const auto& s : db) db_[s.id] = &s;
  }

  const PointCloud& cloud(int shape_id) {
    auto it = cache_.find(shape_id);
    if (it != cache_.end()) return it->second;
    PointCloud pc;
    pc.points = sample_mesh_surface(db_.at(shape_id)->mesh, points_,
                                    Rng::stream(seed_, {streams::kMeshSample, static_cast<std::uint64_t>(shape_id)}));
    return cache_.emplace(shape_id, std::move(pc)).first->second;
  }

  double distance(int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = dist_.find(key);
    if (it != dist_.end()) return it->second;
    const double d = a == b ? 0.0 : chamfer_l1(cloud(a), cloud(b));
    return dist_.emplace(key, d).first->second;
  }

 private:
  std::map<int, const ShapeModel*> db_;
  std::map<int, PointCloud> cache_;
  std::map<std::pair<int, int>, double> dist_;
  int points_;
  std::uint64_t seed_;
};

// Index of the combined-pose-error minimizer among the first n winners.
inline int select_best_hypothesis(const EvalObject& eo, int n, SymmetryClass sym) {
  int best = -1;
  double best_err = std::numeric_limits<double>::infinity();
  const int limit = std::min<int>(n, eo.winners.size());
  for (int i = 0; i < limit; ++i) {
    if (!eo.winners[i]) continue;
    const double e = combined_pose_error(eo.winners[i]->pose, eo.gt_pose, sym);
    if (e < best_err) {
      best_err = e;
      best = i;
    }
  }
  return best;
}

inline double retrieval_similarity(const EvalObject& eo, ChamferCache& chamfer, bool min_mode, int n) {
  double best = std::numeric_limits<double>::infinity();
  double sum = 0;
  int count = 0;
  const int limit = std::min<int>(n, eo.winners.size());
  for (int i = 0; i < limit; ++i) {
    if (!eo.winners[i]) continue;
    const double d = chamfer.distance(eo.winners[i]->shape_id, eo.gt_shape);
    best = std::min(best, d);
    sum += d;
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return min_mode ? best : sum / count;
}

// Scalar spread of an object's winner latents: total variance over dims.
inline double latent_variance(const EvalObject& eo, int n) {
  std::vector<const Eigen::VectorXf*> zs;
  const int limit = std::min<int>(n, eo.winner_latents.size());
  for (int i = 0; i < limit; ++i)
    if (eo.winner_latents[i].size() > 0) zs.push_back(&eo.winner_latents[i]);
  if (zs.size() < 2) return 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(zs[0]->size());
  for (auto* z : zs) mean += z->cast<double>();
  mean /= static_cast<double>(zs.size());
  double var = 0;
  for (auto* z : zs) var += (z->cast<double>() - mean).squaredNorm();
  return var / (static_cast<double>(zs.size()) * mean.size());
}

namespace detail {

template <typename Fn>
CategoryRow per_category(const std::vector<EvalObject>& objs, Fn value_of) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& eo : objs) {
    const double v = value_of(eo);
    if (std::isnan(v)) continue;
    acc[eo.category].first += v;
    acc[eo.category].second += 1;
  }
  CategoryRow row;
  for (const auto& [cat, sv] : acc) row.by_category[cat] = sv.first / sv.second;
  row.finalize();
  return row;
}

}  // namespace detail

inline EvalReport evaluate(const DatasetManifest& test, const std::vector<ViewHypotheses>& hyps,
                           const std::vector<ShapeModel>& db, const EvalConfig& cfg) {
  const auto objs = collect_eval_objects(test, hyps);
  ChamferCache chamfer(db, cfg.chamfer_points, cfg.chamfer_seed);
  std::map<int, Category> cat_of_shape;
  for (const auto& s : db) cat_of_shape[s.id] = s.category;

  EvalReport rep;
  rep.meta["objects"] = objs.size();
  rep.meta["views"] = hyps.size();
  rep.meta["topn_list"] = cfg.topn_list;
  rep.meta["report_n"] = cfg.report_n;
  rep.meta["chamfer_points"] = cfg.chamfer_points;
  rep.meta["thresholds"] = {{"translation_m", cfg.thresholds.translation_m},
                            {"rotation_deg", cfg.thresholds.rotation_deg},
                            {"scale_ratio", cfg.thresholds.scale_ratio}};

  for (int n : cfg.topn_list) {
    rep.alignment_accuracy[n] = detail::per_category(objs, [&](const EvalObject& eo) {
      const auto sym = cfg.symmetry_of(eo.category);
      const int best = select_best_hypothesis(eo, n, sym);
      if (best < 0) return 0.0;  // missing hypotheses count as incorrect
      const Candidate& c = *eo.winners[best];
      const bool class_ok = cat_of_shape.count(c.shape_id) &&
                            category_name(cat_of_shape.at(c.shape_id)) == eo.category;
      return alignment_correct(c.pose, eo.gt_pose, class_ok, cfg.thresholds, sym) ? 100.0 : 0.0;
    });
    rep.retrieval_min[n] =
        detail::per_category(objs, [&](const EvalObject& eo) { return retrieval_similarity(eo, chamfer, true, n); });
    rep.retrieval_avg[n] =
        detail::per_category(objs, [&](const EvalObject& eo) { return retrieval_similarity(eo, chamfer, false, n); });
    rep.scale_error_diffusion[n] = detail::per_category(
        objs, [&](const EvalObject& eo) { return scale_error_topn(eo.diffusion_scales, eo.s_gt, n); });
    rep.scale_error_srs[n] = detail::per_category(
        objs, [&](const EvalObject& eo) { return scale_error_topn(eo.srs_scales, eo.s_gt, n); });
  }

  // metric pose errors over the combined-error-selected hypothesis
  auto metric_of = [&](const EvalObject& eo, int which) {
    const auto sym = cfg.symmetry_of(eo.category);
    const int best = select_best_hypothesis(eo, cfg.report_n, sym);
    if (best < 0) return std::numeric_limits<double>::quiet_NaN();
    const auto e = metric_pose_errors(eo.winners[best]->pose, eo.gt_pose, sym);
    return which == 0 ? e.translation_cm : which == 1 ? e.rotation_deg : e.scale_err;
  };
  rep.metric_translation_cm = detail::per_category(objs, [&](const EvalObject& eo) { return metric_of(eo, 0); });
  rep.metric_rotation_deg = detail::per_category(objs, [&](const EvalObject& eo) { return metric_of(eo, 1); });
  rep.metric_scale_err = detail::per_category(objs, [&](const EvalObject& eo) { return metric_of(eo, 2); });

  // confidence filter: drop objects whose latent-sample variance exceeds the
  // population mean by more than two standard deviations
  std::vector<double> variances;
  for (const auto& eo : objs) variances.push_back(latent_variance(eo, cfg.report_n));
  double vmean = 0;
  for (double v : variances) vmean += v;
  vmean /= std::max<std::size_t>(1, variances.size());
  double vvar = 0;
  for (double v : variances) vvar += (v - vmean) * (v - vmean);
  const double vstd = std::sqrt(vvar / std::max<std::size_t>(1, variances.size()));

  double full_sum = 0, kept_sum = 0;
  int full_cnt = 0, kept_cnt = 0;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const double d = retrieval_similarity(objs[i], chamfer, true, cfg.report_n);
    if (std::isnan(d)) continue;
    full_sum += d;
    ++full_cnt;
    if (variances[i] <= vmean + 2.0 * vstd) {
      kept_sum += d;
      ++kept_cnt;
    }
  }
  rep.confidence_total = full_cnt;
  rep.confidence_kept = kept_cnt;
  rep.confidence_min_chamfer_full = full_cnt ? full_sum / full_cnt : 0.0;
  rep.confidence_min_chamfer_kept = kept_cnt ? kept_sum / kept_cnt : 0.0;
  return rep;
}

inline json row_to_json(const CategoryRow& row) {
  json j;
  for (const auto& [cat, v] : row.by_category) j[cat] = v;
  j["avg"] = row.average;
  return j;
}

inline json EvalReport::to_json() const {
  json j;
  j["meta"] = meta;
  auto table = [](const std::map<int, CategoryRow>& t) {
    json out;
    for (const auto& [n, row] : t) out[std::to_string(n)] = row_to_json(row);
    return out;
  };
  j["alignment_accuracy"] = table(alignment_accuracy);
  j["retrieval_min"] = table(retrieval_min);
  j["retrieval_avg"] = table(retrieval_avg);
  j["scale_error_diffusion"] = table(scale_error_diffusion);
  j["scale_error_srs"] = table(scale_error_srs);
  j["metric_errors"] = {{"translation_cm", row_to_json(metric_translation_cm)},
                        {"rotation_deg", row_to_json(metric_rotation_deg)},
                        {"scale_err", row_to_json(metric_scale_err)}};
  j["confidence_filter"] = {{"kept", confidence_kept},
                            {"total", confidence_total},
                            {"min_chamfer_kept", confidence_min_chamfer_kept},
                            {"min_chamfer_full", confidence_min_chamfer_full}};
  return j;
}

// Delimited per-category tables, one file per metric family.
inline void write_report_tables(const EvalReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write_table = [&](const std::string& name, const std::map<int, CategoryRow>& t) {
    std::ofstream f(dir + "/" + name + ".csv");
    f << "category";
    for (const auto& [n, _] : t) f << ",n=" << n;
    f << "\n";
    std::vector<std::string> cats;
    for (int c = 0; c < kNumCategories; ++c) cats.push_back(category_name(static_cast<Category>(c)));
    cats.push_back("avg");
    for (const auto& cat : cats) {
      f << cat;
      for (const auto& [n, row] : t) {
        if (cat == "avg")
          f << "," << row.average;
        else if (row.by_category.count(cat))
          f << "," << row.by_category.at(cat);
        else
          f << ",";
      }
      f << "\n";
    }
  };
  write_table("alignment_accuracy", rep.alignment_accuracy);
  write_table("retrieval_min", rep.retrieval_min);
  write_table("retrieval_avg", rep.retrieval_avg);
  write_table("scale_error_diffusion", rep.scale_error_diffusion);
  write_table("scale_error_srs", rep.scale_error_srs);

  std::ofstream f(dir + "/metric_errors.csv");
  f << "category,translation_cm,rotation_deg,scale_err\n";
  for (int c = 0; c <= kNumCategories; ++c) {
    const std::string cat = c < kNumCategories ? category_name(static_cast<Category>(c)) : "avg";
    auto cell = [&](const CategoryRow& row) {
      if (cat == "avg") return std::to_string(row.average);
      return row.by_category.count(cat) ? std::to_string(row.by_category.at(cat)) : std::string();
    };
    f << cat << "," << cell(rep.metric_translation_cm) << "," << cell(rep.metric_rotation_deg) << ","
      << cell(rep.metric_scale_err) << "\n";
  }
}

}  // namespace cadalign::eval
