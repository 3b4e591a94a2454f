#pragma once

#include "cadalign/models/noc_context.hpp"
#include "cadalign/synth/shapes.hpp"

namespace cadalign::models {

struct ShapeAEArch {
  int latent_dim = 64;
  int width = 128;
  int surface_points = 512;
  int query_trig_bands = 4;

  nlohmann::json to_json() const {
    return {{"latent_dim", latent_dim},
            {"width", width},
            {"surface_points", surface_points},
            {"query_trig_bands", query_trig_bands}};
  }
  static ShapeAEArch from_json(const nlohmann::json& j) {
    ShapeAEArch a;
    a.latent_dim = j.at("latent_dim");
    a.width = j.at("width");
    a.surface_points = j.at("surface_points");
    a.query_trig_bands = j.at("query_trig_bands");
    return a;
  }
};

// Shape autoencoder: a point encoder pools surface samples into one global
// latent, and a coordinate MLP decodes occupancy at canonical query points.
struct ShapeAutoencoder {
  ShapeAEArch arch;
  nn::Linear enc1, enc2, bottleneck, to_z;
  nn::Linear dec1, dec2, dec3;
  bool trained = false;

  ShapeAutoencoder() = default;
  ShapeAutoencoder(const ShapeAEArch& a, Rng& rng)
      : arch(a),
        enc1(3, a.width / 2, rng),
        enc2(a.width / 2, a.width, rng),
        bottleneck(2 * a.width, a.width, rng),
        to_z(a.width, a.latent_dim, rng),
        dec1(3 + 6 * a.query_trig_bands + a.latent_dim, a.width, rng),
        dec2(a.width, a.width, rng),
        dec3(a.width, 1, rng) {}

  Node* encode(Tape& t, const Mat& surface_rows, long points_per_shape) {
    Node* h = t.silu(enc1(t, t.constant(surface_rows)));
    h = t.silu(enc2(t, h));
    Node* gmax = t.block_max_rows(h, points_per_shape);
    Node* gmean = t.block_mean_rows(h, points_per_shape);
    Node* g = t.silu(bottleneck(t, t.concat_cols({gmax, gmean})));
    return to_z(t, g);
  }

  Mat query_features(const std::vector<Vec3>& queries) const {
    Mat out(static_cast<long>(queries.size()), 3 + 6 * arch.query_trig_bands);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      long c = 0;
      for (int a = 0; a < 3; ++a) out(static_cast<long>(i), c++) = static_cast<float>(queries[i][a]);
      for (int axis = 0; axis < 3; ++axis)
        for (int band = 0; band < arch.query_trig_bands; ++band) {
          const double f = std::ldexp(M_PI, band);
          out(static_cast<long>(i), c++) = static_cast<float>(std::sin(f * queries[i][axis]));
          out(static_cast<long>(i), c++) = static_cast<float>(std::cos(f * queries[i][axis]));
        }
    }
    return out;
  }

  // z: [B, d] broadcast over per-shape query blocks -> occupancy logits
  Node* decode(Tape& t, Node* z, const Mat& query_feats, long queries_per_shape) {
    Node* zb = t.block_broadcast(z, queries_per_shape);
    Node* h = t.silu(dec1(t, t.concat_cols({t.constant(query_feats), zb})));
    h = t.silu(dec2(t, h));
    return dec3(t, h);
  }

  void collect(nn::NamedParams& out) {
    enc1.collect("enc1", out);
    enc2.collect("enc2", out);
    bottleneck.collect("bottleneck", out);
    to_z.collect("to_z", out);
    dec1.collect("dec1", out);
    dec2.collect("dec2", out);
    dec3.collect("dec3", out);
  }

  // deterministic surface sampling per shape id, so re-encoding a shape
  // always yields the same latent
  Mat surface_rows(const ShapeModel& shape, int n_points) const {
    const auto pts = sample_mesh_surface(shape.mesh, n_points,
                                         Rng::stream(0xAE5EEDull, {streams::kMeshSample, static_cast<std::uint64_t>(shape.id)}));
    Mat rows(static_cast<long>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int a = 0; a < 3; ++a) rows(static_cast<long>(i), a) = static_cast<float>(pts[i][a]);
    return rows;
  }

  Eigen::VectorXf shape_encode(const ShapeModel& shape, int n_surface = 0) {
    if (!trained) throw std::runtime_error("shape autoencoder is untrained");
    if (n_surface <= 0) n_surface = arch.surface_points;
    Tape t(false);
    Node* z = encode(t, surface_rows(shape, n_surface), n_surface);
    return z->val.row(0).transpose();
  }

  std::vector<double> shape_occupancy(const Eigen::VectorXf& z, const std::vector<Vec3>& queries) {
    if (!trained) throw std::runtime_error("shape autoencoder is untrained");
    for (const auto& q : queries)
      if (q.cwiseAbs().maxCoeff() > 0.5 + 1e-9)
        throw std::invalid_argument("shape_occupancy: query outside canonical cube");
    Tape t(false);
    Mat zrow(1, arch.latent_dim);
    zrow.row(0) = z.transpose();
    Node* logits = decode(t, t.constant(zrow), query_features(queries), static_cast<long>(queries.size()));
    std::vector<double> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i)
      out[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits->val(static_cast<long>(i), 0))));
    return out;
  }
};

}  // namespace cadalign::models
