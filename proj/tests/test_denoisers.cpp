#include <catch2/catch_amalgamated.hpp>

#include "cadalign/models/train.hpp"
#include "cadalign/retrieval/index.hpp"
#include "helpers.hpp"

using namespace cadalign;
using namespace cadalign::models;

TEST_CASE("depth feature map keeps spatial dims and is constant on constant input") {
  Rng rng(3);
  DepthFeatureNet net(4, 6, rng);
  const long H = 64, W = 64;
  Mat depth = Mat::Constant(H * W, 1, 0.8f);

  Tape t(false);
  Node* out = net.forward(t, t.constant(depth), 1, H, W);
  REQUIRE(out->val.rows() == H * W);
  REQUIRE(out->val.cols() == 6);

  // interior crop away from border effects: receptive field of the stack is
  // well under 20 pixels
  const int m = 20;
  Mat ref = out->val.row(32 * W + 32);
  for (long y = m; y < H - m; ++y)
    for (long x = m; x < W - m; ++x)
      REQUIRE((out->val.row(y * W + x) - ref).cwiseAbs().maxCoeff() < 1e-5f);

  Tape t2(false);
  Node* out2 = net.forward(t2, t2.constant(depth), 1, H, W);
  REQUIRE(out->val == out2->val);

  Mat bad = Mat::Constant(30 * 30, 1, 1.0f);
  Tape t3(false);
  REQUIRE_THROWS_AS(net.forward(t3, t3.constant(bad), 1, 30, 30), std::invalid_argument);
}

TEST_CASE("scale target build and spatial-mean inverse") {
  const Mat S = build_scale_target(1.0, 24);
  REQUIRE(S.minCoeff() == 1.0f);
  REQUIRE(S.maxCoeff() == 1.0f);
  REQUIRE(scale_from_sample(S) == 1.0);

  Mat nonconst(4, 1);
  nonconst << 0.8f, 0.9f, 0.8f, 0.82f;
  REQUIRE(scale_from_sample(nonconst) == Catch::Approx(0.83).margin(1e-7));

  const double s = 2.37;
  REQUIRE(scale_from_sample(build_scale_target(s, 64)) == Catch::Approx(s).margin(1e-6));
  REQUIRE_THROWS_AS(build_scale_target(-1.0, 8), std::invalid_argument);
}

namespace {

PointCloud random_cloud(int n, Rng& rng) {
  PointCloud pc;
  for (int i = 0; i < n; ++i)
    pc.points.emplace_back(rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3), rng.uniform(1.5, 2.5));
  return pc;
}

}  // namespace

TEST_CASE("point features: row count, permutation equivariance, translation channels") {
  Rng rng(11);
  PointFeatureNet net(16, 16, 6, rng);
  PointCloud pc = random_cloud(1024, rng);

  Mat centered, abs_xyz;
  cloud_to_mats(pc, &centered, &abs_xyz);
  auto idx = knn_indices(centered, 6);
  Tape t(false);
  Node* f = net.forward(t, centered, abs_xyz, 1024, idx);
  REQUIRE(f->val.rows() == 1024);
  REQUIRE(f->val.cols() == net.total_channels());

  // permuting input rows permutes output rows identically
  std::vector<int> perm(1024);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  PointCloud pp;
  for (int i : perm) pp.points.push_back(pc.points[i]);
  Mat c2, a2;
  cloud_to_mats(pp, &c2, &a2);
  auto idx2 = knn_indices(c2, 6);
  Tape t2(false);
  Node* f2 = net.forward(t2, c2, a2, 1024, idx2);
  for (int i = 0; i < 1024; ++i)
    REQUIRE((f2->val.row(i) - f->val.row(perm[i])).cwiseAbs().maxCoeff() < 1e-4f);

  // rigid translation: learned channels invariant, only the trailing three
  // absolute-position channels move
  const Vec3 shift(0.4, -0.2, 0.9);
  PointCloud moved = pc;
  for (auto& p : moved.points) p += shift;
  Mat c3, a3;
  cloud_to_mats(moved, &c3, &a3);
  auto idx3 = knn_indices(c3, 6);
  Tape t3(false);
  Node* f3 = net.forward(t3, c3, a3, 1024, idx3);
  const int learned = net.out_channels;
  for (int i = 0; i < 1024; ++i) {
    REQUIRE((f3->val.row(i).head(learned) - f->val.row(i).head(learned)).cwiseAbs().maxCoeff() < 1e-4f);
    for (int a = 0; a < 3; ++a)
      REQUIRE(f3->val(i, learned + a) - f->val(i, learned + a) == Catch::Approx(shift[a]).margin(1e-4));
  }
}

TEST_CASE("noc context: trig bank at zero, default width, Lipschitz bound") {
  const Mat z = trig_features({Vec3::Zero()});
  REQUIRE(z.cols() == 48);
  for (int axis = 0; axis < 3; ++axis)
    for (int band = 0; band < 8; ++band) {
      REQUIRE(z(0, axis * 16 + 2 * band) == 0.0f);       // sin parts vanish
      REQUIRE(z(0, axis * 16 + 2 * band + 1) == 1.0f);   // cos parts are one
    }

  Rng rng(9);
  NocContextNet ctx(512, rng);
  REQUIRE(ctx.context_width == 512);
  NOCSet nocs;
  for (int i = 0; i < 32; ++i) nocs.coords.push_back(cadalign::testing::random_noc(rng));
  const Mat e = ctx.eval(nocs);
  REQUIRE(e.rows() == 32);
  REQUIRE(e.cols() == 512);

  // measured Lipschitz constant stays finite for a small perturbation
  const double delta = 1e-4;
  NOCSet shifted = nocs;
  for (auto& p : shifted.coords) p += Vec3(delta / 3, -delta / 3, delta / 3);
  shifted = NOCSet::from_clamped(std::move(shifted.coords));
  const Mat e2 = ctx.eval(shifted);
  const double L = (e2 - e).norm() / delta;
  REQUIRE(std::isfinite(L));
  REQUIRE(L > 0);

  NOCSet bad;
  bad.coords.push_back(Vec3(0.7, 0, 0));
  REQUIRE_THROWS_AS(ctx.trig(bad), std::invalid_argument);
}

TEST_CASE("shape autoencoder learns occupancy for procedural shapes") {
  std::vector<ShapeModel> db;
  int id = 0;
  for (int c = 0; c < kNumCategories; ++c)
    for (int i = 0; i < 10; ++i) {
      auto s = generate_shape(static_cast<Category>(c), 100 + i);
      s.id = id++;
      db.push_back(std::move(s));
    }

  Rng rng(5);
  ShapeAEArch arch;
  arch.latent_dim = 48;
  arch.width = 128;
  arch.surface_points = 256;
  ShapeAutoencoder ae(arch, rng);

  REQUIRE_THROWS_WITH(ae.shape_encode(db[0]), "shape autoencoder is untrained");

  nn::NamedParams named;
  ae.collect(named);
  std::vector<nn::Param*> params;
  for (auto& [_, p] : named) params.push_back(p);
  nn::AdamConfig acfg;
  acfg.lr = 2e-3f;
  nn::Adam opt(params, acfg);
  TrainConfig cfg;
  cfg.steps = 1500;
  cfg.batch = 8;
  cfg.lr = 2e-3f;
  const auto rep = train_shape_autoencoder(ae, db, cfg, 77, opt);
  REQUIRE(rep.loss_tail() < rep.loss_head());

  // same shape encoded twice -> identical z
  const auto za = ae.shape_encode(db[3]);
  const auto zb = ae.shape_encode(db[3]);
  REQUIRE(za == zb);

  // cube corner far outside a small centered shape decodes as empty
  const auto z = ae.shape_encode(db[0]);
  const auto occ = ae.shape_occupancy(z, {Vec3(0.499, 0.499, 0.499)});
  REQUIRE(occ[0] < 0.5);

  // reconstruction IoU against the analytic solid on a 32^3 grid
  auto grid_iou = [&](const ShapeModel& shape) {
    const auto zz = ae.shape_encode(shape);
    std::vector<Vec3> queries;
    std::vector<bool> gt;
    for (int ix = 0; ix < 32; ++ix)
      for (int iy = 0; iy < 32; ++iy)
        for (int iz = 0; iz < 32; ++iz) {
          const Vec3 q(-0.5 + (ix + 0.5) / 32.0, -0.5 + (iy + 0.5) / 32.0, -0.5 + (iz + 0.5) / 32.0);
          queries.push_back(q);
          gt.push_back(shape.contains(q));
        }
    const auto probs = ae.shape_occupancy(zz, queries);
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool pred = probs[i] > 0.5;
      inter += pred && gt[i];
      uni += pred || gt[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
  };

  REQUIRE(grid_iou(db[0]) >= 0.7);  // seen during training

  ShapeModel held_out = generate_shape(Category::Sofa, 9999);
  held_out.id = 999;
  REQUIRE(grid_iou(held_out) >= 0.7);
}

namespace {

// Puts the model at a generic point: zero-initialized biases leave dead-row
// pre-activations exactly on the relu kink, where one-sided derivatives and
// finite differences legitimately disagree.
void jitter_params(std::vector<nn::Param*>& params, Rng& rng) {
  for (auto* p : params)
    for (long i = 0; i < p->value.rows(); ++i)
      for (long j = 0; j < p->value.cols(); ++j) p->value(i, j) += static_cast<float>(rng.uniform(0.01, 0.05));
}

// Vector-norm relative agreement between tape gradients and central FD.
// Elements whose FD interval straddles a relu kink disagree at coarse h, so
// mismatches are re-measured at a finer step before being counted.
void fd_check(std::vector<nn::Param*> params, const std::function<double()>& value, double tol = 1e-3) {
  double fd2 = 0, diff2 = 0;
  for (auto* p : params) {
    for (long i = 0; i < p->value.rows(); ++i)
      for (long j = 0; j < p->value.cols(); ++j) {
        const float orig = p->value(i, j);
        const double ad = p->grad(i, j);
        double best_fd = 0, best_err = std::numeric_limits<double>::infinity();
        for (float h : {2e-3f, 5e-4f}) {
          p->value(i, j) = orig + h;
          const double up = value();
          p->value(i, j) = orig - h;
          const double dn = value();
          p->value(i, j) = orig;
          const double fd = (up - dn) / (2.0 * h);
          if (std::abs(fd - ad) < best_err) {
            best_err = std::abs(fd - ad);
            best_fd = fd;
          }
          if (best_err < 2e-5) break;  // already at the noise floor
        }
        fd2 += best_fd * best_fd;
        diff2 += (best_fd - ad) * (best_fd - ad);
      }
  }
  REQUIRE(std::sqrt(diff2) / std::max(1e-12, std::sqrt(fd2)) < tol);
}

}  // namespace

TEST_CASE("micro scale denoiser gradient matches finite differences") {
  Rng rng(31);
  ScaleModelArch arch;
  arch.feat_width = 1;
  arch.feat_channels = 1;
  arch.unet_width = 1;
  arch.temb = 2;
  ScaleModel model(arch, rng);

  const long H = 8, W = 8;
  Mat depth(H * W, 1), s_t(H * W, 1), eps(H * W, 1), temb(H * W, 2);
  for (long i = 0; i < H * W; ++i) {
    depth(i, 0) = static_cast<float>(rng.uniform(0.2, 1.0));
    s_t(i, 0) = static_cast<float>(rng.normal());
    eps(i, 0) = static_cast<float>(rng.normal());
    temb(i, 0) = 0.3f;
    temb(i, 1) = 0.9f;
  }

  nn::NamedParams named;
  model.collect(named);
  std::vector<nn::Param*> params;
  for (auto& [_, p] : named) params.push_back(p);

  auto loss_of = [&](bool with_grad) {
    Tape t(with_grad);
    Node* feats = model.features.forward(t, t.constant(depth), 1, H, W);
    Node* pred = model.denoise(t, t.constant(s_t), feats, t.constant(temb), 1, H, W);
    Node* loss = t.l1_to(pred, eps);
    if (with_grad) t.backward(loss);
    return static_cast<double>(loss->val(0, 0));
  };
  Rng jit(777);
  jitter_params(params, jit);
  for (auto* p : params) p->zero_grad();
  loss_of(true);
  fd_check(params, [&]() { return loss_of(false); });
}

TEST_CASE("micro noc denoiser gradient matches finite differences") {
  Rng rng(41);
  NocModelArch arch;
  arch.feat_width = 2;
  arch.feat_channels = 2;
  arch.knn = 3;
  arch.width = 3;
  arch.temb = 2;
  NocModel model(arch, rng);

  const int N = 24;
  PointCloud pc = random_cloud(N, rng);
  Mat centered, abs_xyz;
  cloud_to_mats(pc, &centered, &abs_xyz);
  auto idx = knn_indices(centered, arch.knn);
  Mat x_t(N, 3), eps(N, 3), temb(N, 2);
  for (int i = 0; i < N; ++i) {
    for (int a = 0; a < 3; ++a) {
      x_t(i, a) = static_cast<float>(rng.normal());
      eps(i, a) = static_cast<float>(rng.normal());
    }
    temb(i, 0) = 0.1f;
    temb(i, 1) = 0.95f;
  }

  nn::NamedParams named;
  model.collect(named);
  std::vector<nn::Param*> params;
  for (auto& [_, p] : named) params.push_back(p);

  auto loss_of = [&](bool with_grad) {
    Tape t(with_grad);
    Node* feats = model.features.forward(t, centered, abs_xyz, N, idx);
    Node* pred = model.denoise(t, t.constant(x_t), feats, t.constant(temb), N);
    Node* loss = t.l1_to(pred, eps);
    if (with_grad) t.backward(loss);
    return static_cast<double>(loss->val(0, 0));
  };
  Rng jit(777);
  jitter_params(params, jit);
  for (auto* p : params) p->zero_grad();
  loss_of(true);
  fd_check(params, [&]() { return loss_of(false); });
}

TEST_CASE("micro latent denoiser gradient matches finite differences (x0 loss)") {
  Rng rng(51);
  LatentModelArch arch;
  arch.latent_dim = 3;
  arch.context_width = 4;
  arch.context_points = 5;
  arch.width = 4;
  arch.attn_dim = 3;
  arch.blocks = 1;
  arch.temb = 2;
  LatentModel model(arch, rng);

  const int B = 2;
  Mat z_t(B, 3), x0(B, 3), temb(B, 2), trig(B * arch.context_points, kTrigFeatures);
  for (int b = 0; b < B; ++b) {
    for (int a = 0; a < 3; ++a) {
      z_t(b, a) = static_cast<float>(rng.normal());
      x0(b, a) = static_cast<float>(rng.normal());
    }
    temb(b, 0) = 0.6f;
    temb(b, 1) = 0.4f;
    NOCSet nocs;
    for (int i = 0; i < arch.context_points; ++i) nocs.coords.push_back(cadalign::testing::random_noc(rng));
    trig.middleRows(b * arch.context_points, arch.context_points) = trig_features(nocs.coords);
  }

  nn::NamedParams named;
  model.collect(named);
  std::vector<nn::Param*> params;
  for (auto& [_, p] : named) params.push_back(p);

  auto loss_of = [&](bool with_grad) {
    Tape t(with_grad);
    Node* pred = model.denoise(t, t.constant(z_t), t.constant(temb), trig);
    Node* loss = t.l1_to(pred, x0);
    if (with_grad) t.backward(loss);
    return static_cast<double>(loss->val(0, 0));
  };
  Rng jit(777);
  jitter_params(params, jit);
  for (auto* p : params) p->zero_grad();
  loss_of(true);
  fd_check(params, [&]() { return loss_of(false); });
}

TEST_CASE("micro autoencoder gradient matches finite differences") {
  Rng rng(61);
  ShapeAEArch arch;
  arch.latent_dim = 2;
  arch.width = 4;
  arch.surface_points = 12;
  arch.query_trig_bands = 1;
  ShapeAutoencoder ae(arch, rng);

  Mat surf(12, 3);
  for (int i = 0; i < 12; ++i)
    for (int a = 0; a < 3; ++a) surf(i, a) = static_cast<float>(rng.uniform(-0.5, 0.5));
  std::vector<Vec3> queries;
  Mat labels(8, 1);
  for (int i = 0; i < 8; ++i) {
    queries.push_back(cadalign::testing::random_noc(rng));
    labels(i, 0) = i % 2 ? 1.0f : 0.0f;
  }

  nn::NamedParams named;
  ae.collect(named);
  std::vector<nn::Param*> params;
  for (auto& [_, p] : named) params.push_back(p);

  auto loss_of = [&](bool with_grad) {
    Tape t(with_grad);
    Node* z = ae.encode(t, surf, 12);
    Node* logits = ae.decode(t, z, ae.query_features(queries), 8);
    Node* loss = t.bce_logits(logits, labels);
    if (with_grad) t.backward(loss);
    return static_cast<double>(loss->val(0, 0));
  };
  Rng jit(777);
  jitter_params(params, jit);
  for (auto* p : params) p->zero_grad();
  loss_of(true);
  fd_check(params, [&]() { return loss_of(false); });
}
