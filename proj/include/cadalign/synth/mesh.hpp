#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cadalign/core/rng.hpp"
#include "cadalign/geometry/types.hpp"

namespace cadalign {

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  bool valid() const { return (hi.array() >= lo.array()).all(); }

  static bool disjoint(const Aabb& a, const Aabb& b, double gap = 0.0) {
    for (int k = 0; k < 3; ++k)
      if (a.hi[k] + gap <= b.lo[k] || b.hi[k] + gap <= a.lo[k]) return true;
    return false;
  }
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  Aabb bounds() const {
    Aabb b;
    for (const auto& v : vertices) b.expand(v);
    return b;
  }

  void append(const TriMesh& other) {
    const int base = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (auto t : other.triangles) {
      t[0] += base;
      t[1] += base;
      t[2] += base;
      triangles.push_back(t);
    }
  }

  double surface_area() const {
    double a = 0;
    for (const auto& t : triangles) {
      const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
      const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
      a += 0.5 * e1.cross(e2).norm();
    }
    return a;
  }
};

// Analytic solids backing a procedural shape; used both to emit triangles and
// as an exact inside test for occupancy supervision.
struct Primitive {
  enum class Kind { Box, CylinderY } kind = Kind::Box;
  Vec3 center = Vec3::Zero();
  Vec3 half = Vec3::Zero();  // box half-extents; cylinder: (radius, half-height, radius)

  bool contains(const Vec3& p, double pad = 0.0) const {
    const Vec3 d = p - center;
    if (kind == Kind::Box) {
      return (d.cwiseAbs().array() <= half.array() + pad).all();
    }
    const double r = half.x() + pad;
    return std::abs(d.y()) <= half.y() + pad && d.x() * d.x() + d.z() * d.z() <= r * r;
  }

  // Applies an affine map of the form x -> scale .* x + offset (axis-aligned),
  // which is the only transform canonicalization needs.
  void rescale(const Vec3& scale, const Vec3& offset) {
    center = center.cwiseProduct(scale) + offset;
    if (kind == Kind::Box) {
      half = half.cwiseProduct(scale);
    } else {
      // cylinders stay cylinders only for xz-uniform scaling; canonicalization
      // uses uniform scale so this holds exactly
      half = Vec3(half.x() * scale.x(), half.y() * scale.y(), half.z() * scale.z());
    }
  }
};

namespace meshgen {

inline TriMesh box(const Vec3& center, const Vec3& half) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back(center + Vec3((i & 1) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(),
                                       (i & 4) ? half.z() : -half.z()));
  // CCW when seen from outside
  const int f[12][3] = {{0, 2, 3}, {0, 3, 1},   // z-
                        {4, 5, 7}, {4, 7, 6},   // z+
                        {0, 1, 5}, {0, 5, 4},   // y-
                        {2, 6, 7}, {2, 7, 3},   // y+
                        {0, 4, 6}, {0, 6, 2},   // x-
                        {1, 3, 7}, {1, 7, 5}};  // x+
  for (const auto& t : f) m.triangles.push_back({t[0], t[1], t[2]});
  return m;
}

inline TriMesh cylinder_y(const Vec3& center, double radius, double half_height, int segments = 12) {
  TriMesh m;
  const int n = std::max(3, segments);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    const double x = radius * std::cos(a), z = radius * std::sin(a);
    m.vertices.push_back(center + Vec3(x, -half_height, z));
    m.vertices.push_back(center + Vec3(x, half_height, z));
  }
  const int bot_c = static_cast<int>(m.vertices.size());
  m.vertices.push_back(center + Vec3(0, -half_height, 0));
  const int top_c = static_cast<int>(m.vertices.size());
  m.vertices.push_back(center + Vec3(0, half_height, 0));
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const int b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
    m.triangles.push_back({b0, t0, b1});
    m.triangles.push_back({b1, t0, t1});
    m.triangles.push_back({bot_c, b1, b0});  // bottom cap, facing -y
    m.triangles.push_back({top_c, t0, t1});  // top cap, facing +y
  }
  return m;
}

}  // namespace meshgen

// Area-weighted surface sampling, deterministic given the seed.
inline std::vector<Vec3> sample_mesh_surface(const TriMesh& mesh, int n, std::uint64_t seed) {
  if (mesh.triangles.empty()) throw std::invalid_argument("sample_mesh_surface: empty mesh");
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    total += 0.5 * e1.cross(e2).norm();
    cumulative.push_back(total);
  }
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double r = rng.uniform01() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
    const auto& t = mesh.triangles[std::min<std::size_t>(it - cumulative.begin(), mesh.triangles.size() - 1)];
    double u = rng.uniform01(), v = rng.uniform01();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.push_back(mesh.vertices[t[0]] + u * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                  v * (mesh.vertices[t[2]] - mesh.vertices[t[0]]));
  }
  return out;
}

}  // namespace cadalign
