#pragma once

#include <map>
#include <vector>

#include "cadalign/synth/shapes.hpp"

namespace cadalign {

struct Placement {
  int shape_id = -1;
  Pose9 pose;  // canonical -> world (y up, floor at y = 0)
};

struct Scene {
  std::uint64_t id = 0;
  std::vector<Placement> placements;
  double floor_half = 3.0;
  bool placement_shortfall = false;  // fewer objects than requested
};

struct LayoutConfig {
  int min_objects = 1;
  int max_objects = 3;
  double position_range = 1.6;
  double gap = 0.02;          // required clearance between object AABBs
  int place_retries = 24;
  // category base max-extent in meters, matched to typical furniture
  std::array<std::pair<double, double>, kNumCategories> size_range = {
      std::pair<double, double>{1.9, 2.3},   // bed
      {1.3, 2.0},                            // bookshelf
      {0.9, 1.6},                            // cabinet
      {0.85, 1.1},                           // chair
      {1.5, 2.2},                            // sofa
      {1.0, 1.8}};                           // table
  double axis_jitter = 0.15;  // per-axis anisotropic scale jitter
};

namespace detail {

inline Aabb world_aabb(const ShapeModel& shape, const Pose9& pose) {
  const Aabb c = shape.mesh.bounds();
  Aabb w;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1) ? c.hi.x() : c.lo.x(), (i & 2) ? c.hi.y() : c.lo.y(), (i & 4) ? c.hi.z() : c.lo.z());
    w.expand(pose.apply(corner));
  }
  return w;
}

inline Mat3 yaw_rotation(double a) {
  Mat3 R;
  R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return R;
}

}  // namespace detail

inline std::map<Category, std::vector<int>> shapes_by_category(const std::vector<ShapeModel>& db) {
  std::map<Category, std::vector<int>> out;
  for (std::size_t i = 0; i < db.size(); ++i) out[db[i].category].push_back(static_cast<int>(i));
  return out;
}

// Places 1..max_objects shapes on the floor with random yaw, position and
// per-axis scale. Placements whose world AABB cannot be made disjoint within
// the retry budget are dropped (scene keeps fewer objects and is flagged).
inline Scene build_scene(const std::vector<ShapeModel>& db, const LayoutConfig& layout, std::uint64_t seed) {
  if (db.empty()) throw std::invalid_argument("build_scene: empty shape database");
  Rng rng(Rng::stream(seed, {streams::kScene}));
  Scene scene;
  scene.id = seed;
  const auto by_cat = shapes_by_category(db);
  std::vector<Category> cats;
  for (const auto& [c, _] : by_cat) cats.push_back(c);

  const int want = rng.uniform_int(layout.min_objects, layout.max_objects);
  std::vector<Aabb> placed_boxes;
  for (int k = 0; k < want; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < layout.place_retries && !placed; ++attempt) {
      const Category cat = cats[rng.uniform_index(cats.size())];
      const auto& pool = by_cat.at(cat);
      const int db_index = pool[rng.uniform_index(pool.size())];
      const ShapeModel& shape = db[db_index];

      const auto [lo, hi] = layout.size_range[static_cast<int>(cat)];
      const double base = rng.uniform(lo, hi);
      Pose9 pose;
      pose.R = detail::yaw_rotation(rng.uniform(0, 2 * M_PI));
      pose.s = base * Vec3(rng.uniform(1 - layout.axis_jitter, 1 + layout.axis_jitter),
                           rng.uniform(1 - layout.axis_jitter, 1 + layout.axis_jitter),
                           rng.uniform(1 - layout.axis_jitter, 1 + layout.axis_jitter));
      pose.t = Vec3(rng.uniform(-layout.position_range, layout.position_range), 0,
                    rng.uniform(-layout.position_range, layout.position_range));
      // rest on the floor: lift so the transformed AABB touches y = 0
      Aabb box = detail::world_aabb(shape, pose);
      pose.t.y() = -box.lo.y();
      box.lo.y() = 0;
      box.hi.y() += pose.t.y();

      bool free = true;
      for (const auto& other : placed_boxes)
        if (!Aabb::disjoint(box, other, layout.gap)) {
          free = false;
          break;
        }
      if (!free) continue;

      scene.placements.push_back({shape.id, pose});
      placed_boxes.push_back(box);
      placed = true;
    }
    if (!placed) scene.placement_shortfall = true;
  }
  return scene;
}

// Synthetic-data augmentation: every placement's shape is swapped for a
// different shape of the same category while the pose, including scale, is
// kept bit-identical. Categories with a single shape are left unchanged.
inline Scene augment_replace(const Scene& scene, const std::vector<ShapeModel>& db, std::uint64_t seed) {
  Rng rng(Rng::stream(seed, {streams::kAugment}));
  std::map<int, const ShapeModel*> by_id;
  for (const auto& s : db) by_id[s.id] = &s;
  const auto by_cat = shapes_by_category(db);

  Scene out = scene;
  for (auto& pl : out.placements) {
    const ShapeModel* cur = by_id.at(pl.shape_id);
    const auto& pool = by_cat.at(cur->category);
    if (pool.size() < 2) continue;  // nothing to swap in
    int replacement = pl.shape_id;
    while (replacement == pl.shape_id) replacement = db[pool[rng.uniform_index(pool.size())]].id;
    pl.shape_id = replacement;
  }
  return out;
}

}  // namespace cadalign
