#pragma once

#include <limits>
#include <vector>

#include "cadalign/geometry/affine.hpp"
#include "cadalign/geometry/backproject.hpp"
#include "cadalign/synth/scene.hpp"

namespace cadalign {

// World -> camera rigid transform; CV convention (x right, y down, z forward).
struct CameraExtrinsics {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 to_camera(const Vec3& pw) const { return R * pw + t; }

  static CameraExtrinsics look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 up(0, 1, 0);
    Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = Vec3(1, 0, 0);  // looking straight up/down
    x.normalize();
    const Vec3 y = z.cross(x);  // points world-down for level cameras
    Mat3 R_wc;
    R_wc.col(0) = x;
    R_wc.col(1) = y;
    R_wc.col(2) = z;
    CameraExtrinsics e;
    e.R = R_wc.transpose();
    e.t = -e.R * eye;
    return e;
  }
};

// One rendered view: dense depth, per-pixel instance ids (0 = none), NOC and
// normal channels. NOC pixels are defined exactly where an object's mask is
// set; the floor contributes depth and normals but no instance id.
struct GBuffer {
  DepthMap depth;
  InstanceMask mask;
  NocMap noc;
  NormalMap normal;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  int anchor_instance = -1;
};

namespace raster {

constexpr double kNearPlane = 0.05;

struct ClipVertex {
  Vec3 cam;  // camera-frame position
  Vec3 attr; // canonical-frame position (NOC interpolant)
};

// Clips a triangle against z >= near; emits 0..4 vertices.
inline int clip_near(const ClipVertex in[3], ClipVertex out[4]) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = in[i];
    const ClipVertex& b = in[(i + 1) % 3];
    const bool ain = a.cam.z() >= kNearPlane;
    const bool bin = b.cam.z() >= kNearPlane;
    if (ain) out[n++] = a;
    if (ain != bin) {
      const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
      out[n++] = {a.cam + t * (b.cam - a.cam), a.attr + t * (b.attr - a.attr)};
    }
  }
  return n;
}

// id semantics: id > 0 writes mask+NOC, id == 0 renders geometry only (floor).
inline void rasterize_mesh(const TriMesh& mesh, const Affine34& obj_to_cam, std::uint16_t id, GBuffer& g) {
  const CameraIntrinsics& K = g.intrinsics;
  const Mat3 M = obj_to_cam.leftCols<3>();
  const Vec3 b = obj_to_cam.col(3);
  std::vector<Vec3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) cam[i] = M * mesh.vertices[i] + b;

  for (const auto& tri : mesh.triangles) {
    ClipVertex cv[3] = {{cam[tri[0]], mesh.vertices[tri[0]]},
                        {cam[tri[1]], mesh.vertices[tri[1]]},
                        {cam[tri[2]], mesh.vertices[tri[2]]}};
    ClipVertex poly[4];
    const int n = clip_near(cv, poly);
    for (int f = 2; f < n; ++f) {
      const ClipVertex v0 = poly[0], v1 = poly[f - 1], v2 = poly[f];
      // screen positions at pixel-index coordinates
      const Eigen::Vector2d p0 = project(v0.cam, K), p1 = project(v1.cam, K), p2 = project(v2.cam, K);
      const double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
      if (std::abs(area) < 1e-12) continue;
      const int u_min = std::max(0, static_cast<int>(std::ceil(std::min({p0.x(), p1.x(), p2.x()}))));
      const int u_max = std::min(K.width - 1, static_cast<int>(std::floor(std::max({p0.x(), p1.x(), p2.x()}))));
      const int v_min = std::max(0, static_cast<int>(std::ceil(std::min({p0.y(), p1.y(), p2.y()}))));
      const int v_max = std::min(K.height - 1, static_cast<int>(std::floor(std::max({p0.y(), p1.y(), p2.y()}))));
      if (u_min > u_max || v_min > v_max) continue;

      // camera-frame face normal, oriented toward the camera
      Vec3 nrm = (v1.cam - v0.cam).cross(v2.cam - v0.cam);
      const double len = nrm.norm();
      if (len < 1e-15) continue;
      nrm /= len;
      if (nrm.dot(v0.cam) > 0) nrm = -nrm;

      const double inv_area = 1.0 / area;
      const double iz0 = 1.0 / v0.cam.z(), iz1 = 1.0 / v1.cam.z(), iz2 = 1.0 / v2.cam.z();
      for (int v = v_min; v <= v_max; ++v) {
        for (int u = u_min; u <= u_max; ++u) {
          const double w0 = ((p1.x() - u) * (p2.y() - v) - (p1.y() - v) * (p2.x() - u)) * inv_area;
          const double w1 = ((p2.x() - u) * (p0.y() - v) - (p2.y() - v) * (p0.x() - u)) * inv_area;
          const double w2 = 1.0 - w0 - w1;
          if (w0 < 0 || w1 < 0 || w2 < 0) continue;
          const double iz = w0 * iz0 + w1 * iz1 + w2 * iz2;
          const double z = 1.0 / iz;
          if (!(z > 0) || z >= g.depth.at(u, v)) continue;
          g.depth.at(u, v) = z;
          g.mask.at(u, v) = id;
          const double c0 = w0 * iz0 * z, c1 = w1 * iz1 * z, c2 = w2 * iz2 * z;
          const Vec3 noc = id > 0 ? Vec3(c0 * v0.attr + c1 * v1.attr + c2 * v2.attr) : Vec3(Vec3::Zero());
          for (int a = 0; a < 3; ++a) {
            g.noc.at(u, v, a) = static_cast<float>(noc[a]);
            g.normal.at(u, v, a) = static_cast<float>(nrm[a]);
          }
        }
      }
    }
  }
}

}  // namespace raster

inline GBuffer make_gbuffer(const CameraIntrinsics& K, const CameraExtrinsics& E) {
  GBuffer g;
  g.intrinsics = K;
  g.extrinsics = E;
  g.depth = DepthMap(K.width, K.height, 1, std::numeric_limits<double>::infinity());
  g.mask = InstanceMask(K.width, K.height, 1, 0);
  g.noc = NocMap(K.width, K.height, 3, 0.0f);
  g.normal = NormalMap(K.width, K.height, 3, 0.0f);
  return g;
}

inline void finalize_gbuffer(GBuffer& g) {
  for (auto& d : g.depth.raw())
    if (!std::isfinite(d)) d = 0.0f;  // uncovered pixels carry depth 0
}

inline TriMesh make_floor_mesh(double half) {
  // tessellated so near-plane clipping of oblique views stays well-behaved
  TriMesh m;
  const int n = 8;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      m.vertices.emplace_back(-half + 2 * half * i / n, 0.0, -half + 2 * half * j / n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int a = i * (n + 1) + j, b = a + 1, c = a + (n + 1), d = c + 1;
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({b, d, c});
    }
  return m;
}

// Object pose in camera frame: extrinsics o placement, still R*diag(s) form.
inline Pose9 pose_in_camera(const CameraExtrinsics& E, const Pose9& world_pose) {
  Pose9 p;
  p.R = E.R * world_pose.R;
  p.t = E.R * world_pose.t + E.t;
  p.s = world_pose.s;
  return p;
}

inline GBuffer render_scene(const Scene& scene, const std::vector<ShapeModel>& db, const CameraIntrinsics& K,
                            const CameraExtrinsics& E) {
  std::map<int, const ShapeModel*> by_id;
  for (const auto& s : db) by_id[s.id] = &s;
  GBuffer g = make_gbuffer(K, E);
  Affine34 world_to_cam;
  world_to_cam.leftCols<3>() = E.R;
  world_to_cam.col(3) = E.t;
  raster::rasterize_mesh(make_floor_mesh(scene.floor_half), world_to_cam, 0, g);
  for (std::size_t i = 0; i < scene.placements.size(); ++i) {
    const auto& pl = scene.placements[i];
    const Pose9 cam_pose = pose_in_camera(E, pl.pose);
    raster::rasterize_mesh(by_id.at(pl.shape_id)->mesh, cam_pose.as_affine(), static_cast<std::uint16_t>(i + 1), g);
  }
  finalize_gbuffer(g);
  return g;
}

// Silhouette of a single placement with no occluders, same camera.
inline int unoccluded_mask_pixels(const Scene& scene, int placement_index, const std::vector<ShapeModel>& db,
                                  const CameraIntrinsics& K, const CameraExtrinsics& E) {
  std::map<int, const ShapeModel*> by_id;
  for (const auto& s : db) by_id[s.id] = &s;
  GBuffer g = make_gbuffer(K, E);
  const auto& pl = scene.placements[placement_index];
  raster::rasterize_mesh(by_id.at(pl.shape_id)->mesh, pose_in_camera(E, pl.pose).as_affine(),
                         static_cast<std::uint16_t>(placement_index + 1), g);
  int n = 0;
  for (auto v : g.mask.raw()) n += v != 0;
  return n;
}

struct ViewConfig {
  int width = 128, height = 96;
  double min_coverage = 0.15;  // visible / unoccluded pixel ratio for the anchor
  int min_visible_px = 12;
  int attempts_per_view = 50;
  double eye_height_min = 1.0, eye_height_max = 1.8;
  double distance_min = 1.3, distance_max = 2.9;
};

inline CameraIntrinsics default_intrinsics(int w, int h) {
  CameraIntrinsics K;
  K.width = w;
  K.height = h;
  K.fx = K.fy = h;  // ~53 degree vertical fov
  K.cx = w / 2;
  K.cy = h / 2;
  return K;
}

// Samples camera poses by rejection until some anchor object keeps at least
// min_coverage of its unoccluded silhouette; may return fewer views when the
// attempt budget runs out.
inline std::vector<GBuffer> render_views(const Scene& scene, const std::vector<ShapeModel>& db,
                                         const CameraIntrinsics& K, int num_views, std::uint64_t seed,
                                         const ViewConfig& cfg = ViewConfig{}) {
  std::vector<GBuffer> views;
  if (scene.placements.empty()) return views;
  std::map<int, const ShapeModel*> by_id;
  for (const auto& s : db) by_id[s.id] = &s;

  for (int view = 0; view < num_views; ++view) {
    Rng rng(Rng::stream(seed, {streams::kView, static_cast<std::uint64_t>(view)}));
    const int anchor = view % static_cast<int>(scene.placements.size());
    const auto& pl = scene.placements[anchor];
    const Aabb box = detail::world_aabb(*by_id.at(pl.shape_id), pl.pose);
    const Vec3 target = box.center();

    bool accepted = false;
    for (int attempt = 0; attempt < cfg.attempts_per_view && !accepted; ++attempt) {
      const double az = rng.uniform(0, 2 * M_PI);
      const double dist = rng.uniform(cfg.distance_min, cfg.distance_max) + 0.5 * box.extent().norm();
      Vec3 eye = target + dist * Vec3(std::cos(az), 0, std::sin(az));
      eye.y() = rng.uniform(cfg.eye_height_min, cfg.eye_height_max);
      const Vec3 jitter(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
      const CameraExtrinsics E = CameraExtrinsics::look_at(eye, target + jitter);

      GBuffer g = render_scene(scene, db, K, E);
      int visible = 0;
      for (auto v : g.mask.raw()) visible += v == static_cast<std::uint16_t>(anchor + 1);
      if (visible < cfg.min_visible_px) continue;
      const int full = unoccluded_mask_pixels(scene, anchor, db, K, E);
      if (full == 0 || static_cast<double>(visible) / full < cfg.min_coverage) continue;
      g.anchor_instance = anchor + 1;
      views.push_back(std::move(g));
      accepted = true;
    }
  }
  return views;
}

}  // namespace cadalign
