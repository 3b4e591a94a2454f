#pragma once

#include <json.hpp>

#include "cadalign/core/tensorfile.hpp"
#include "cadalign/models/shape_autoencoder.hpp"

namespace cadalign {

// Immutable latent shape database: one d-dimensional code per shape id with
// precomputed norms; queries are linear cosine scans (exact, db-scale).
struct LatentIndex {
  std::vector<int> ids;
  nn::Mat codes;  // [n, d]
  std::vector<double> norms;

  std::size_t size() const { return ids.size(); }

  int row_of(int id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    throw std::out_of_range("latent index: unknown shape id");
  }
};

inline LatentIndex build_index(const std::vector<ShapeModel>& db, models::ShapeAutoencoder& encoder) {
  LatentIndex index;
  index.codes.resize(static_cast<long>(db.size()), encoder.arch.latent_dim);
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto z = encoder.shape_encode(db[i]);
    index.codes.row(static_cast<long>(i)) = z.transpose();
    const double norm = z.norm();
    if (!(norm > 0)) throw std::runtime_error("degenerate latent");
    index.ids.push_back(db[i].id);
    index.norms.push_back(norm);
  }
  return index;
}

struct RetrievalHit {
  int id = -1;
  double similarity = -2.0;
};

// Top-k by cosine similarity, descending; ties broken by id order.
inline std::vector<RetrievalHit> query_cosine(const LatentIndex& index, const Eigen::VectorXf& z, int k) {
  if (k < 1) throw std::invalid_argument("query_cosine: k must be >= 1");
  if (z.size() != index.codes.cols()) throw std::invalid_argument("query_cosine: dimension mismatch");
  const double qn = z.norm();
  if (!(qn > 0)) throw std::invalid_argument("query_cosine: zero-norm query");
  std::vector<RetrievalHit> hits(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double dot = index.codes.row(static_cast<long>(i)).dot(z.transpose());
    hits[i] = {index.ids[i], dot / (qn * index.norms[i])};
  }
  std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  hits.resize(std::min<std::size_t>(k, hits.size()));
  return hits;
}

inline void save_index(const LatentIndex& index, const std::string& path) {
  TensorFile tf;
  std::vector<std::int32_t> ids(index.ids.begin(), index.ids.end());
  tf.add<std::int32_t>("ids", {static_cast<std::uint32_t>(ids.size())}, ids);
  std::vector<float> codes(index.codes.size());
  Eigen::Map<nn::Mat>(codes.data(), index.codes.rows(), index.codes.cols()) = index.codes;
  tf.add<float>("codes", {static_cast<std::uint32_t>(index.codes.rows()), static_cast<std::uint32_t>(index.codes.cols())},
                codes);
  tf.save(path);
}

inline LatentIndex load_index(const std::string& path) {
  const TensorFile tf = TensorFile::load(path);
  LatentIndex index;
  for (auto id : tf.entry("ids").as<std::int32_t>()) index.ids.push_back(id);
  const auto& e = tf.entry("codes");
  const auto data = e.as<float>();
  index.codes = Eigen::Map<const nn::Mat>(data.data(), e.dims[0], e.dims[1]);
  for (long i = 0; i < index.codes.rows(); ++i) index.norms.push_back(index.codes.row(i).norm());
  return index;
}

}  // namespace cadalign
