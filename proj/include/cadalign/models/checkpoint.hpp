#pragma once

#include <json.hpp>

#include "cadalign/core/tensorfile.hpp"
#include "cadalign/ddpm/schedule.hpp"
#include "cadalign/nn/layers.hpp"

namespace cadalign::models {

using nlohmann::json;

// Diffusion hyperparameters carried with each trained model.
struct DiffusionSpec {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::string kind = "linear";

  ddpm::Schedule schedule() const { return ddpm::make_schedule(T, beta_start, beta_end, kind); }

  json to_json() const { return {{"T", T}, {"beta_start", beta_start}, {"beta_end", beta_end}, {"kind", kind}}; }
  static DiffusionSpec from_json(const json& j) {
    DiffusionSpec s;
    s.T = j.at("T");
    s.beta_start = j.at("beta_start");
    s.beta_end = j.at("beta_end");
    s.kind = j.at("kind");
    return s;
  }
};

// Self-describing checkpoint: a tensor container holding a JSON "meta" entry
// (model kind, architecture, parameterization, schedule, config hash, step)
// plus named weight tensors and, when present, Adam moments for resuming.
inline void save_checkpoint(const std::string& path, const json& meta, const nn::NamedParams& params,
                            const nn::Adam* adam = nullptr) {
  TensorFile tf;
  const std::string meta_str = meta.dump(1);
  tf.add<std::uint8_t>("meta", {static_cast<std::uint32_t>(meta_str.size())},
                       reinterpret_cast<const std::uint8_t*>(meta_str.data()));
  for (const auto& [name, p] : params) {
    std::vector<float> data(p->value.size());
    Eigen::Map<nn::Mat>(data.data(), p->value.rows(), p->value.cols()) = p->value;
    tf.add<float>("p:" + name,
                  {static_cast<std::uint32_t>(p->value.rows()), static_cast<std::uint32_t>(p->value.cols())}, data);
  }
  if (adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dump = [&](const std::string& prefix, const nn::Mat& m) {
        std::vector<float> data(m.size());
        Eigen::Map<nn::Mat>(data.data(), m.rows(), m.cols()) = m;
        tf.add<float>(prefix + params[i].first,
                      {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, data);
      };
      dump("am:", adam->m()[i]);
      dump("av:", adam->v()[i]);
    }
  }
  tf.save(path);
}

struct LoadedCheckpoint {
  json meta;
  TensorFile tensors;

  nn::Mat tensor(const std::string& name) const {
    const auto& e = tensors.entry(name);
    const auto data = e.as<float>();
    return Eigen::Map<const nn::Mat>(data.data(), e.dims[0], e.dims[1]);
  }

  void restore_params(const nn::NamedParams& params) const {
    for (const auto& [name, p] : params) {
      const nn::Mat m = tensor("p:" + name);
      if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      p->value = m;
      p->zero_grad();
    }
  }

  bool has_adam() const { return !tensors.names().empty() && tensors.has("am:" + first_param_name()); }

  std::string first_param_name() const {
    for (const auto& n : tensors.names())
      if (n.rfind("p:", 0) == 0) return n.substr(2);
    return "";
  }

  void restore_adam(const nn::NamedParams& params, nn::Adam& adam, long step) const {
    std::vector<nn::Mat> ms, vs;
    for (const auto& [name, p] : params) {
      (void)p;
      ms.push_back(tensor("am:" + name));
      vs.push_back(tensor("av:" + name));
    }
    adam.restore(step, std::move(ms), std::move(vs));
  }
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  LoadedCheckpoint c{json{}, TensorFile::load(path)};
  const auto bytes = c.tensors.entry("meta").as<std::uint8_t>();
  c.meta = json::parse(std::string(bytes.begin(), bytes.end()));
  return c;
}

}  // namespace cadalign::models
