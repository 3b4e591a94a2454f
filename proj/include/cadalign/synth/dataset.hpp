#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "cadalign/core/hash.hpp"
#include "cadalign/core/tensorfile.hpp"
#include "cadalign/synth/depth_sim.hpp"
#include "cadalign/synth/render.hpp"

namespace cadalign {

using nlohmann::json;

struct DatasetGenConfig {
  int scenes = 50;
  int views_per_scene = 3;
  int shapes_per_category = 10;
  double augment_fraction = 0.5;  // fraction of scenes re-dressed by shape replacement
  int width = 128, height = 96;
  LayoutConfig layout;
  ViewConfig view;
  DepthBiasParams depth_bias;
  double test_min_mask_fraction = 0.10;  // test split: drop objects under 10% of the image plane

  json to_json() const {
    json j;
    j["scenes"] = scenes;
    j["views_per_scene"] = views_per_scene;
    j["shapes_per_category"] = shapes_per_category;
    j["augment_fraction"] = augment_fraction;
    j["width"] = width;
    j["height"] = height;
    j["layout"] = {{"min_objects", layout.min_objects},
                   {"max_objects", layout.max_objects},
                   {"position_range", layout.position_range},
                   {"gap", layout.gap},
                   {"place_retries", layout.place_retries},
                   {"axis_jitter", layout.axis_jitter}};
    j["view"] = {{"min_coverage", view.min_coverage},
                 {"min_visible_px", view.min_visible_px},
                 {"attempts_per_view", view.attempts_per_view},
                 {"eye_height", {view.eye_height_min, view.eye_height_max}},
                 {"distance", {view.distance_min, view.distance_max}}};
    j["depth_bias"] = {{"log_mu", depth_bias.log_mu},
                       {"log_sigma", depth_bias.log_sigma},
                       {"field_amplitude", depth_bias.field_amplitude},
                       {"noise_sigma", depth_bias.noise_sigma}};
    j["test_min_mask_fraction"] = test_min_mask_fraction;
    return j;
  }

  std::string hash() const { return hash_string_hex(to_json().dump()); }
};

struct ObjectRecord {
  int instance_id = 0;  // mask value
  int shape_id = -1;
  std::string category;
  Pose9 pose;  // canonical -> camera
  double s_gt = 1.0;
  int visible_px = 0;
  int full_px = 0;
  bool centroid_in_image = true;
};

struct ViewRecord {
  std::string container;  // path relative to the split directory
  std::string sidecar;
  std::uint64_t scene_index = 0;
  int view_index = 0;
  double s_gt = 1.0;   // Eq.-5 offset over the union of object masks
  double bias_c = 1.0; // simulator bookkeeping
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  std::vector<ObjectRecord> objects;

  // arrays, populated by load_view_arrays
  DepthMap depth_gt, depth_est;
  InstanceMask mask;
  NocMap noc;
  NormalMap normal;
};

struct DatasetManifest {
  std::string split;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ViewRecord> records;  // arrays not loaded
  std::string root;                 // split directory
};

namespace detail {

inline json pose_to_json(const Pose9& p) {
  json j;
  std::vector<double> R(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R[r * 3 + c] = p.R(r, c);
  j["R"] = R;
  j["t"] = {p.t.x(), p.t.y(), p.t.z()};
  j["s"] = {p.s.x(), p.s.y(), p.s.z()};
  return j;
}

inline Pose9 pose_from_json(const json& j) {
  Pose9 p;
  const auto R = j.at("R").get<std::vector<double>>();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.R(r, c) = R[r * 3 + c];
  const auto t = j.at("t").get<std::vector<double>>();
  const auto s = j.at("s").get<std::vector<double>>();
  p.t = Vec3(t[0], t[1], t[2]);
  p.s = Vec3(s[0], s[1], s[2]);
  return p;
}

inline json intrinsics_to_json(const CameraIntrinsics& K) {
  return json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics K;
  K.fx = j.at("fx");
  K.fy = j.at("fy");
  K.cx = j.at("cx");
  K.cy = j.at("cy");
  K.width = j.at("width");
  K.height = j.at("height");
  return K;
}

inline json extrinsics_to_json(const CameraExtrinsics& E) {
  std::vector<double> R(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R[r * 3 + c] = E.R(r, c);
  return json{{"R", R}, {"t", {E.t.x(), E.t.y(), E.t.z()}}};
}

inline CameraExtrinsics extrinsics_from_json(const json& j) {
  CameraExtrinsics E;
  const auto R = j.at("R").get<std::vector<double>>();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) E.R(r, c) = R[r * 3 + c];
  const auto t = j.at("t").get<std::vector<double>>();
  E.t = Vec3(t[0], t[1], t[2]);
  return E;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return json::parse(f);
}

}  // namespace detail

inline void save_shape_db(const std::vector<ShapeModel>& db, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json j;
  j["shapes"] = json::array();
  TensorFile meshes;
  for (const auto& s : db) {
    json e;
    e["id"] = s.id;
    e["category"] = category_name(s.category);
    e["params"] = s.params;
    json prims = json::array();
    for (const auto& p : s.prims) {
      prims.push_back({{"kind", p.kind == Primitive::Kind::Box ? "box" : "cylinder_y"},
                       {"center", {p.center.x(), p.center.y(), p.center.z()}},
                       {"half", {p.half.x(), p.half.y(), p.half.z()}}});
    }
    e["prims"] = prims;
    j["shapes"].push_back(e);

    std::vector<double> verts;
    verts.reserve(s.mesh.vertices.size() * 3);
    for (const auto& v : s.mesh.vertices) {
      verts.push_back(v.x());
      verts.push_back(v.y());
      verts.push_back(v.z());
    }
    std::vector<std::int32_t> tris;
    tris.reserve(s.mesh.triangles.size() * 3);
    for (const auto& t : s.mesh.triangles) {
      tris.push_back(t[0]);
      tris.push_back(t[1]);
      tris.push_back(t[2]);
    }
    meshes.add<double>("v" + std::to_string(s.id), {static_cast<std::uint32_t>(s.mesh.vertices.size()), 3}, verts);
    meshes.add<std::int32_t>("t" + std::to_string(s.id), {static_cast<std::uint32_t>(s.mesh.triangles.size()), 3}, tris);
  }
  detail::write_text(dir + "/shape_db.json", j.dump(1));
  meshes.save(dir + "/meshes.ctr");
}

inline std::vector<ShapeModel> load_shape_db(const std::string& dir) {
  const json j = detail::read_json(dir + "/shape_db.json");
  const TensorFile meshes = TensorFile::load(dir + "/meshes.ctr");
  std::vector<ShapeModel> db;
  for (const auto& e : j.at("shapes")) {
    ShapeModel s;
    s.id = e.at("id");
    s.category = category_from_name(e.at("category"));
    s.params = e.at("params").get<std::vector<double>>();
    for (const auto& pj : e.at("prims")) {
      Primitive p;
      p.kind = pj.at("kind") == "box" ? Primitive::Kind::Box : Primitive::Kind::CylinderY;
      const auto c = pj.at("center").get<std::vector<double>>();
      const auto h = pj.at("half").get<std::vector<double>>();
      p.center = Vec3(c[0], c[1], c[2]);
      p.half = Vec3(h[0], h[1], h[2]);
      s.prims.push_back(p);
    }
    const auto verts = meshes.entry("v" + std::to_string(s.id)).as<double>();
    for (std::size_t i = 0; i + 2 < verts.size(); i += 3) s.mesh.vertices.emplace_back(verts[i], verts[i + 1], verts[i + 2]);
    const auto tris = meshes.entry("t" + std::to_string(s.id)).as<std::int32_t>();
    for (std::size_t i = 0; i + 2 < tris.size(); i += 3)
      s.mesh.triangles.push_back({tris[i], tris[i + 1], tris[i + 2]});
    db.push_back(std::move(s));
  }
  return db;
}

// Writes one view: the array container plus a JSON sidecar.
inline void save_view(const ViewRecord& rec, const std::string& split_dir) {
  TensorFile tf;
  const auto W = static_cast<std::uint32_t>(rec.depth_gt.width());
  const auto H = static_cast<std::uint32_t>(rec.depth_gt.height());
  tf.add<double>("depth_gt", {H, W}, rec.depth_gt.raw());
  tf.add<double>("depth_est", {H, W}, rec.depth_est.raw());
  tf.add<std::uint16_t>("mask", {H, W}, rec.mask.raw());
  tf.add<float>("noc", {H, W, 3}, rec.noc.raw());
  tf.add<float>("normal", {H, W, 3}, rec.normal.raw());
  tf.save(split_dir + "/" + rec.container);

  json j;
  j["scene_index"] = rec.scene_index;
  j["view_index"] = rec.view_index;
  j["s_gt"] = rec.s_gt;
  j["bias_c"] = rec.bias_c;
  j["intrinsics"] = detail::intrinsics_to_json(rec.intrinsics);
  j["extrinsics"] = detail::extrinsics_to_json(rec.extrinsics);
  j["objects"] = json::array();
  for (const auto& o : rec.objects) {
    json oj;
    oj["instance_id"] = o.instance_id;
    oj["shape_id"] = o.shape_id;
    oj["category"] = o.category;
    oj["pose"] = detail::pose_to_json(o.pose);
    oj["s_gt"] = o.s_gt;
    oj["visible_px"] = o.visible_px;
    oj["full_px"] = o.full_px;
    oj["centroid_in_image"] = o.centroid_in_image;
    j["objects"].push_back(oj);
  }
  detail::write_text(split_dir + "/" + rec.sidecar, j.dump(1));
}

inline ViewRecord load_view_meta(const json& oj, const std::string& split_dir) {
  ViewRecord rec;
  rec.container = oj.at("container");
  rec.sidecar = oj.at("sidecar");
  const json j = detail::read_json(split_dir + "/" + rec.sidecar);
  rec.scene_index = j.at("scene_index");
  rec.view_index = j.at("view_index");
  rec.s_gt = j.at("s_gt");
  rec.bias_c = j.at("bias_c");
  rec.intrinsics = detail::intrinsics_from_json(j.at("intrinsics"));
  rec.extrinsics = detail::extrinsics_from_json(j.at("extrinsics"));
  for (const auto& o : j.at("objects")) {
    ObjectRecord r;
    r.instance_id = o.at("instance_id");
    r.shape_id = o.at("shape_id");
    r.category = o.at("category");
    r.pose = detail::pose_from_json(o.at("pose"));
    r.s_gt = o.at("s_gt");
    r.visible_px = o.at("visible_px");
    r.full_px = o.at("full_px");
    r.centroid_in_image = o.at("centroid_in_image");
    rec.objects.push_back(std::move(r));
  }
  return rec;
}

inline void load_view_arrays(ViewRecord& rec, const std::string& split_dir) {
  const TensorFile tf = TensorFile::load(split_dir + "/" + rec.container);
  const auto& d = tf.entry("depth_gt");
  const int H = static_cast<int>(d.dims[0]), W = static_cast<int>(d.dims[1]);
  rec.depth_gt = DepthMap(W, H, 1);
  rec.depth_gt.raw() = d.as<double>();
  rec.depth_est = DepthMap(W, H, 1);
  rec.depth_est.raw() = tf.entry("depth_est").as<double>();
  rec.mask = InstanceMask(W, H, 1);
  rec.mask.raw() = tf.entry("mask").as<std::uint16_t>();
  rec.noc = NocMap(W, H, 3);
  rec.noc.raw() = tf.entry("noc").as<float>();
  rec.normal = NormalMap(W, H, 3);
  rec.normal.raw() = tf.entry("normal").as<float>();
}

// Generates scenes, renders views, runs the depth simulator and writes one
// split. Split "test" applies the evaluation filter: objects whose visible
// mask is under test_min_mask_fraction of the image plane or whose centroid
// projects outside the image are dropped, and views left without objects are
// skipped entirely.
inline DatasetManifest export_dataset(const DatasetGenConfig& cfg, const std::string& split,
                                      const std::string& out_root, std::uint64_t seed,
                                      const std::vector<ShapeModel>& db) {
  namespace fs = std::filesystem;
  const std::string split_dir = out_root + "/" + split;
  fs::create_directories(split_dir + "/views");

  const CameraIntrinsics K = default_intrinsics(cfg.width, cfg.height);
  const bool is_test = split == "test";

  DatasetManifest man;
  man.split = split;
  man.seed = seed;
  man.config_hash = cfg.hash();
  man.root = split_dir;

  int record_id = 0;
  for (int scene_i = 0; scene_i < cfg.scenes; ++scene_i) {
    const std::uint64_t scene_seed = Rng::stream(seed, {streams::kScene, static_cast<std::uint64_t>(scene_i)});
    Scene scene = build_scene(db, cfg.layout, scene_seed);
    Rng aug_rng(Rng::stream(scene_seed, {streams::kAugment, 99}));
    if (aug_rng.uniform01() < cfg.augment_fraction) scene = augment_replace(scene, db, scene_seed);

    ViewConfig vcfg = cfg.view;
    const auto views = render_views(scene, db, K, cfg.views_per_scene, scene_seed, vcfg);
    for (std::size_t view_i = 0; view_i < views.size(); ++view_i) {
      const GBuffer& g = views[view_i];
      const auto sim = simulate_depth_estimate(
          g.depth, cfg.depth_bias, Rng::stream(scene_seed, {streams::kDepthSim, static_cast<std::uint64_t>(view_i)}));

      ViewRecord rec;
      rec.scene_index = static_cast<std::uint64_t>(scene_i);
      rec.view_index = static_cast<int>(view_i);
      rec.intrinsics = K;
      rec.extrinsics = g.extrinsics;
      rec.depth_gt = g.depth;
      rec.depth_est = sim.depth;
      rec.mask = g.mask;
      rec.noc = g.noc;
      rec.normal = g.normal;
      rec.bias_c = sim.bias;

      std::vector<int> visible(scene.placements.size(), 0);
      for (auto m : g.mask.raw())
        if (m > 0 && m <= scene.placements.size()) visible[m - 1]++;

      bool any_mask = false;
      for (std::size_t p = 0; p < scene.placements.size(); ++p) {
        if (visible[p] == 0) continue;
        any_mask = true;
        ObjectRecord o;
        o.instance_id = static_cast<int>(p) + 1;
        o.shape_id = scene.placements[p].shape_id;
        const ShapeModel* shape = nullptr;
        for (const auto& s : db)
          if (s.id == o.shape_id) shape = &s;
        o.category = category_name(shape->category);
        o.pose = pose_in_camera(g.extrinsics, scene.placements[p].pose);
        o.s_gt = scale_gt(rec.depth_est, rec.depth_gt, rec.mask, static_cast<std::uint16_t>(o.instance_id));
        o.visible_px = visible[p];
        o.full_px = unoccluded_mask_pixels(scene, static_cast<int>(p), db, K, g.extrinsics);
        const Vec3 centroid_cam = o.pose.apply(shape->mesh.bounds().center());
        o.centroid_in_image = centroid_cam.z() > 0;
        if (o.centroid_in_image) {
          const auto uv = project(centroid_cam, K);
          o.centroid_in_image = uv.x() >= 0 && uv.x() < K.width && uv.y() >= 0 && uv.y() < K.height;
        }
        if (is_test) {
          const double frac = static_cast<double>(o.visible_px) / (K.width * K.height);
          if (frac < cfg.test_min_mask_fraction || !o.centroid_in_image) continue;
        }
        rec.objects.push_back(std::move(o));
      }
      if (!any_mask) continue;           // no object visible at all
      if (is_test && rec.objects.empty()) continue;  // filtered out entirely

      rec.s_gt = scale_gt(rec.depth_est, rec.depth_gt, rec.mask, 0);

      char name[64];
      std::snprintf(name, sizeof(name), "views/view_%06d", record_id);
      rec.container = std::string(name) + ".ctr";
      rec.sidecar = std::string(name) + ".json";
      save_view(rec, split_dir);
      ++record_id;

      rec.depth_gt = DepthMap();
      rec.depth_est = DepthMap();
      rec.mask = InstanceMask();
      rec.noc = NocMap();
      rec.normal = NormalMap();
      man.records.push_back(std::move(rec));
    }
  }

  json j;
  j["split"] = man.split;
  j["seed"] = man.seed;
  j["config_hash"] = man.config_hash;
  j["config"] = cfg.to_json();
  j["shape_db"] = "../shapes";
  j["records"] = json::array();
  for (const auto& r : man.records) {
    j["records"].push_back({{"container", r.container},
                            {"sidecar", r.sidecar},
                            {"scene_index", r.scene_index},
                            {"view_index", r.view_index},
                            {"s_gt", r.s_gt},
                            {"objects", r.objects.size()}});
  }
  detail::write_text(split_dir + "/manifest.json", j.dump(1));
  return man;
}

inline DatasetManifest load_manifest(const std::string& split_dir) {
  const json j = detail::read_json(split_dir + "/manifest.json");
  DatasetManifest man;
  man.split = j.at("split");
  man.seed = j.at("seed");
  man.config_hash = j.at("config_hash");
  man.root = split_dir;
  for (const auto& r : j.at("records")) man.records.push_back(load_view_meta(r, split_dir));
  return man;
}

}  // namespace cadalign
