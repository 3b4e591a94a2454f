#pragma once

#include <string>
#include <vector>

#include "cadalign/synth/mesh.hpp"

namespace cadalign {

enum class Category : int { Bed = 0, Bookshelf, Cabinet, Chair, Sofa, Table };
constexpr int kNumCategories = 6;

inline const char* category_name(Category c) {
  switch (c) {
    case Category::Bed: return "bed";
    case Category::Bookshelf: return "bookshelf";
    case Category::Cabinet: return "cabinet";
    case Category::Chair: return "chair";
    case Category::Sofa: return "sofa";
    case Category::Table: return "table";
  }
  return "?";
}

inline Category category_from_name(const std::string& s) {
  for (int i = 0; i < kNumCategories; ++i)
    if (s == category_name(static_cast<Category>(i))) return static_cast<Category>(i);
  throw std::invalid_argument("unknown category: " + s);
}

// A canonical shape: primitive-composed mesh fit to [-0.5, 0.5]^3, +y up,
// with its analytic solids kept for exact inside tests.
struct ShapeModel {
  int id = -1;
  Category category = Category::Chair;
  TriMesh mesh;
  std::vector<Primitive> prims;
  std::vector<double> params;

  bool contains(const Vec3& p) const {
    for (const auto& pr : prims)
      if (pr.contains(p)) return true;
    return false;
  }
};

namespace detail {

inline void add_part(ShapeModel& sm, const Primitive& prim, int cyl_segments = 12) {
  sm.prims.push_back(prim);
  if (prim.kind == Primitive::Kind::Box) {
    sm.mesh.append(meshgen::box(prim.center, prim.half));
  } else {
    sm.mesh.append(meshgen::cylinder_y(prim.center, prim.half.x(), prim.half.y(), cyl_segments));
  }
}

inline Primitive box_prim(const Vec3& center, const Vec3& half) {
  Primitive p;
  p.kind = Primitive::Kind::Box;
  p.center = center;
  p.half = half;
  return p;
}

inline Primitive cyl_prim(const Vec3& center, double radius, double half_h) {
  Primitive p;
  p.kind = Primitive::Kind::CylinderY;
  p.center = center;
  p.half = Vec3(radius, half_h, radius);
  return p;
}

// Uniform rescale + recenter so the vertex AABB fits [-0.5, 0.5]^3 with the
// longest axis filling the cube. Applied to mesh and solids alike.
inline void canonicalize(ShapeModel& sm) {
  const Aabb b = sm.mesh.bounds();
  const double ext = b.extent().maxCoeff();
  if (!(ext > 0)) throw std::runtime_error("canonicalize: degenerate shape");
  const double k = 1.0 / ext;
  const Vec3 c = b.center();
  for (auto& v : sm.mesh.vertices) v = (v - c) * k;
  for (auto& pr : sm.prims) pr.rescale(Vec3::Constant(k), -c * k);
}

}  // namespace detail

// Procedural stand-in for a furniture CAD database: six categories composed
// from boxes and cylinders with seeded proportions, canonicalized to the unit
// cube. Same (category, seed) always yields the same shape; params records
// the sampled generator values.
inline ShapeModel generate_shape(Category category, std::uint64_t seed) {
  using namespace detail;
  Rng rng(Rng::stream(seed, {streams::kShape, static_cast<std::uint64_t>(category)}));
  ShapeModel sm;
  sm.category = category;
  auto p = [&](double lo, double hi) {
    const double v = rng.uniform(lo, hi);
    sm.params.push_back(v);
    return v;
  };
  auto pick = [&](int n) {
    const int v = static_cast<int>(rng.uniform_index(n));
    sm.params.push_back(v);
    return v;
  };

  switch (category) {
    case Category::Chair: {
      const double sw = p(0.40, 0.55);          // seat width
      const double sd = p(0.40, 0.55);          // seat depth
      const double sh = p(0.38, 0.50);          // seat height
      const double st = p(0.035, 0.06);         // seat thickness
      const double back_h = p(0.35, 0.60);      // backrest above seat
      const double back_t = p(0.03, 0.05);
      const double leg_r = p(0.018, 0.032);
      const int round_legs = pick(2);
      const int arms = pick(2);
      add_part(sm, box_prim({0, sh - st / 2, 0}, {sw / 2, st / 2, sd / 2}));
      add_part(sm, box_prim({0, sh + back_h / 2, -sd / 2 + back_t / 2}, {sw / 2, back_h / 2, back_t / 2}));
      const double lx = sw / 2 - leg_r, lz = sd / 2 - leg_r;
      for (int ix : {-1, 1})
        for (int iz : {-1, 1}) {
          if (round_legs)
            add_part(sm, cyl_prim({ix * lx, (sh - st) / 2, iz * lz}, leg_r, (sh - st) / 2), 8);
          else
            add_part(sm, box_prim({ix * lx, (sh - st) / 2, iz * lz}, {leg_r, (sh - st) / 2, leg_r}));
        }
      if (arms) {
        const double arm_h = 0.55 * back_h;
        for (int ix : {-1, 1})
          add_part(sm, box_prim({ix * (sw / 2 - 0.02), sh + arm_h / 2, 0.02}, {0.02, arm_h / 2, sd / 2 - 0.04}));
      }
      break;
    }
    case Category::Table: {
      const double tw = p(0.70, 1.60);
      const double td = p(0.55, 1.00);
      const double th = p(0.65, 0.78);
      const double tt = p(0.03, 0.06);
      const int pedestal = pick(2);
      add_part(sm, box_prim({0, th - tt / 2, 0}, {tw / 2, tt / 2, td / 2}));
      if (pedestal) {
        const double pr = p(0.05, 0.09);
        add_part(sm, cyl_prim({0, (th - tt) / 2, 0}, pr, (th - tt) / 2), 10);
        add_part(sm, box_prim({0, 0.02, 0}, {0.45 * tw / 2, 0.02, 0.45 * td / 2}));
      } else {
        const double leg_r = p(0.02, 0.04);
        const double lx = tw / 2 - 2 * leg_r, lz = td / 2 - 2 * leg_r;
        for (int ix : {-1, 1})
          for (int iz : {-1, 1})
            add_part(sm, box_prim({ix * lx, (th - tt) / 2, iz * lz}, {leg_r, (th - tt) / 2, leg_r}));
      }
      break;
    }
    case Category::Bed: {
      const double bw = p(0.95, 1.85);   // width
      const double bl = p(1.90, 2.15);   // length
      const double base_h = p(0.18, 0.32);
      const double mat_h = p(0.14, 0.24);
      const double head_h = p(0.35, 0.80);
      const double head_t = p(0.04, 0.08);
      add_part(sm, box_prim({0, base_h / 2, 0}, {bw / 2, base_h / 2, bl / 2}));
      add_part(sm, box_prim({0, base_h + mat_h / 2, 0.015 * bl}, {0.96 * bw / 2, mat_h / 2, 0.95 * bl / 2}));
      add_part(sm, box_prim({0, (base_h + mat_h + head_h) / 2, -bl / 2 + head_t / 2},
                            {bw / 2, (base_h + mat_h + head_h) / 2, head_t / 2}));
      break;
    }
    case Category::Sofa: {
      const double ww = p(1.20, 2.20);
      const double wd = p(0.75, 0.95);
      const double base_h = p(0.30, 0.42);
      const double back_h = p(0.30, 0.48);
      const double back_t = p(0.12, 0.20);
      const double arm_w = p(0.10, 0.20);
      const double arm_h = p(0.12, 0.30);
      add_part(sm, box_prim({0, base_h / 2, 0}, {ww / 2, base_h / 2, wd / 2}));
      add_part(sm, box_prim({0, base_h + back_h / 2, -wd / 2 + back_t / 2}, {ww / 2, back_h / 2, back_t / 2}));
      for (int ix : {-1, 1})
        add_part(sm, box_prim({ix * (ww / 2 - arm_w / 2), base_h + arm_h / 2, 0}, {arm_w / 2, arm_h / 2, wd / 2}));
      break;
    }
    case Category::Bookshelf: {
      const double w = p(0.60, 1.10);
      const double h = p(1.20, 2.00);
      const double d = p(0.25, 0.40);
      const double panel_t = p(0.015, 0.03);
      const int shelves = 2 + pick(4);  // 2..5 internal shelves
      add_part(sm, box_prim({-w / 2 + panel_t / 2, h / 2, 0}, {panel_t / 2, h / 2, d / 2}));
      add_part(sm, box_prim({w / 2 - panel_t / 2, h / 2, 0}, {panel_t / 2, h / 2, d / 2}));
      add_part(sm, box_prim({0, h / 2, -d / 2 + panel_t / 2}, {w / 2 - panel_t, h / 2, panel_t / 2}));
      for (int i = 0; i <= shelves; ++i) {
        const double y = panel_t / 2 + (h - panel_t) * i / shelves;
        add_part(sm, box_prim({0, y, panel_t / 4}, {w / 2 - panel_t, panel_t / 2, d / 2 - panel_t / 4}));
      }
      break;
    }
    case Category::Cabinet: {
      const double w = p(0.55, 1.30);
      const double h = p(0.70, 1.60);
      const double d = p(0.35, 0.55);
      const double plinth_h = p(0.04, 0.10);
      const double overhang = p(0.0, 0.03);
      add_part(sm, box_prim({0, plinth_h / 2, 0}, {0.92 * w / 2, plinth_h / 2, 0.92 * d / 2}));
      add_part(sm, box_prim({0, plinth_h + (h - plinth_h) / 2, 0}, {w / 2, (h - plinth_h) / 2, d / 2}));
      add_part(sm, box_prim({0, h + 0.01, 0}, {w / 2 + overhang, 0.01, d / 2 + overhang}));
      break;
    }
  }

  detail::canonicalize(sm);
  return sm;
}

// id convention: shapes are generated per category with sequential seeds and
// numbered db-wide; ids are stable for a given (categories, per_category).
inline std::vector<ShapeModel> generate_shape_db(int per_category, std::uint64_t seed) {
  std::vector<ShapeModel> db;
  db.reserve(per_category * kNumCategories);
  int id = 0;
  for (int c = 0; c < kNumCategories; ++c)
    for (int i = 0; i < per_category; ++i) {
      ShapeModel sm = generate_shape(static_cast<Category>(c), Rng::stream(seed, {streams::kShape, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)}));
      sm.id = id++;
      db.push_back(std::move(sm));
    }
  return db;
}

}  // namespace cadalign
