#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace cadalign::nn {

using Mat = Eigen::MatrixXf;

// Trainable tensor living outside the tape; gradients accumulate here across
// a forward/backward pass and are consumed by the optimizer.
struct Param {
  Mat value;
  Mat grad;

  explicit Param(Mat v = Mat()) : value(std::move(v)) { grad = Mat::Zero(value.rows(), value.cols()); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  long size() const { return value.size(); }
};

struct Node {
  Mat val;
  Mat grad;
  bool requires_grad = false;
  std::function<void()> back;  // adds this node's grad into its parents
};

// Reverse-mode tape over float matrices. Point sets ride as [N, C] rows,
// image batches as [B*H*W, C] with explicit dims passed to the spatial ops.
// With grad disabled the same code path runs forward-only.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}

  bool grad_enabled() const { return grad_; }

  Node* constant(Mat v) {
    Node* n = fresh();
    n->val = std::move(v);
    return n;
  }

  Node* param(Param& p) {
    Node* n = fresh();
    n->val = p.value;
    if (grad_) {
      n->requires_grad = true;
      Param* pp = &p;
      n->back = [n, pp]() { pp->grad += n->grad; };
    }
    return n;
  }

  Node* matmul(Node* a, Node* b) {
    Node* n = fresh();
    n->val.noalias() = a->val * b->val;
    if (track(n, {a, b})) {
      n->back = [n, a, b]() {
        if (a->requires_grad) ensure(a).noalias() += n->grad * b->val.transpose();
        if (b->requires_grad) ensure(b).noalias() += a->val.transpose() * n->grad;
      };
    }
    return n;
  }

  Node* add(Node* a, Node* b) {
    Node* n = fresh();
    n->val = a->val + b->val;
    if (track(n, {a, b})) {
      n->back = [n, a, b]() {
        if (a->requires_grad) ensure(a) += n->grad;
        if (b->requires_grad) ensure(b) += n->grad;
      };
    }
    return n;
  }

  Node* sub(Node* a, Node* b) {
    Node* n = fresh();
    n->val = a->val - b->val;
    if (track(n, {a, b})) {
      n->back = [n, a, b]() {
        if (a->requires_grad) ensure(a) += n->grad;
        if (b->requires_grad) ensure(b) -= n->grad;
      };
    }
    return n;
  }

  Node* ewmul(Node* a, Node* b) {
    Node* n = fresh();
    n->val = a->val.cwiseProduct(b->val);
    if (track(n, {a, b})) {
      n->back = [n, a, b]() {
        if (a->requires_grad) ensure(a) += n->grad.cwiseProduct(b->val);
        if (b->requires_grad) ensure(b) += n->grad.cwiseProduct(a->val);
      };
    }
    return n;
  }

  Node* scale(Node* a, float k) {
    Node* n = fresh();
    n->val = a->val * k;
    if (track(n, {a})) {
      n->back = [n, a, k]() { ensure(a) += n->grad * k; };
    }
    return n;
  }

  // broadcast row vector [1, C] over the rows of a [N, C]
  Node* add_rowvec(Node* a, Node* b) {
    Node* n = fresh();
    n->val = a->val.rowwise() + b->val.row(0);
    if (track(n, {a, b})) {
      n->back = [n, a, b]() {
        if (a->requires_grad) ensure(a) += n->grad;
        if (b->requires_grad) ensure(b).row(0) += n->grad.colwise().sum();
      };
    }
    return n;
  }

  Node* relu(Node* a) {
    Node* n = fresh();
    n->val = a->val.cwiseMax(0.0f);
    if (track(n, {a})) {
      n->back = [n, a]() {
        ensure(a) += n->grad.cwiseProduct((a->val.array() > 0.0f).cast<float>().matrix());
      };
    }
    return n;
  }

  Node* silu(Node* a) {
    Node* n = fresh();
    Mat sg = (1.0f / (1.0f + (-a->val.array()).exp())).matrix();
    n->val = a->val.cwiseProduct(sg);
    if (track(n, {a})) {
      n->back = [n, a, sg = std::move(sg)]() {
        // d/dx x*s(x) = s + x*s*(1-s)
        Mat d = sg.array() * (1.0f + a->val.array() * (1.0f - sg.array()));
        ensure(a) += n->grad.cwiseProduct(d);
      };
    }
    return n;
  }

  Node* sigmoid(Node* a) {
    Node* n = fresh();
    n->val = (1.0f / (1.0f + (-a->val.array()).exp())).matrix();
    if (track(n, {a})) {
      n->back = [n, a]() {
        ensure(a) += n->grad.cwiseProduct((n->val.array() * (1.0f - n->val.array())).matrix());
      };
    }
    return n;
  }

  Node* tanh_(Node* a) {
    Node* n = fresh();
    n->val = a->val.array().tanh().matrix();
    if (track(n, {a})) {
      n->back = [n, a]() { ensure(a) += n->grad.cwiseProduct((1.0f - n->val.array().square()).matrix()); };
    }
    return n;
  }

  Node* softmax_rows(Node* a) {
    Node* n = fresh();
    n->val = a->val;
    for (long r = 0; r < n->val.rows(); ++r) {
      const float m = n->val.row(r).maxCoeff();
      n->val.row(r) = (n->val.row(r).array() - m).exp();
      n->val.row(r) /= n->val.row(r).sum();
    }
    if (track(n, {a})) {
      n->back = [n, a]() {
        Mat& g = ensure(a);
        for (long r = 0; r < n->val.rows(); ++r) {
          const float dot = n->grad.row(r).dot(n->val.row(r));
          g.row(r) += (n->grad.row(r).array() - dot).matrix().cwiseProduct(n->val.row(r));
        }
      };
    }
    return n;
  }

  Node* concat_cols(const std::vector<Node*>& parts) {
    Node* n = fresh();
    long cols = 0;
    for (auto* p : parts) cols += p->val.cols();
    n->val.resize(parts[0]->val.rows(), cols);
    long c0 = 0;
    for (auto* p : parts) {
      n->val.middleCols(c0, p->val.cols()) = p->val;
      c0 += p->val.cols();
    }
    if (track(n, parts)) {
      n->back = [n, parts]() {
        long c = 0;
        for (auto* p : parts) {
          if (p->requires_grad) ensure(p) += n->grad.middleCols(c, p->val.cols());
          c += p->val.cols();
        }
      };
    }
    return n;
  }

  Node* slice_cols(Node* a, long c0, long len) {
    Node* n = fresh();
    n->val = a->val.middleCols(c0, len);
    if (track(n, {a})) {
      n->back = [n, a, c0, len]() { ensure(a).middleCols(c0, len) += n->grad; };
    }
    return n;
  }

  Node* slice_rows(Node* a, long r0, long len) {
    Node* n = fresh();
    n->val = a->val.middleRows(r0, len);
    if (track(n, {a})) {
      n->back = [n, a, r0, len]() { ensure(a).middleRows(r0, len) += n->grad; };
    }
    return n;
  }

  Node* concat_rows(const std::vector<Node*>& parts) {
    Node* n = fresh();
    long rows = 0;
    for (auto* p : parts) rows += p->val.rows();
    n->val.resize(rows, parts[0]->val.cols());
    long r0 = 0;
    for (auto* p : parts) {
      n->val.middleRows(r0, p->val.rows()) = p->val;
      r0 += p->val.rows();
    }
    if (track(n, parts)) {
      n->back = [n, parts]() {
        long r = 0;
        for (auto* p : parts) {
          if (p->requires_grad) ensure(p) += n->grad.middleRows(r, p->val.rows());
          r += p->val.rows();
        }
      };
    }
    return n;
  }

  Node* transpose(Node* a) {
    Node* n = fresh();
    n->val = a->val.transpose();
    if (track(n, {a})) {
      n->back = [n, a]() { ensure(a) += n->grad.transpose(); };
    }
    return n;
  }

  // mean over every element -> [1, 1]
  Node* mean_all(Node* a) {
    Node* n = fresh();
    n->val = Mat::Constant(1, 1, a->val.mean());
    if (track(n, {a})) {
      n->back = [n, a]() {
        ensure(a).array() += n->grad(0, 0) / static_cast<float>(a->val.size());
      };
    }
    return n;
  }

  // per-sample mean over blocks of `rows` rows: [B*rows, C] -> [B, C]
  Node* block_mean_rows(Node* a, long rows) {
    const long B = a->val.rows() / rows;
    Node* n = fresh();
    n->val.resize(B, a->val.cols());
    for (long b = 0; b < B; ++b) n->val.row(b) = a->val.middleRows(b * rows, rows).colwise().mean();
    if (track(n, {a})) {
      n->back = [n, a, rows, B]() {
        Mat& g = ensure(a);
        for (long b = 0; b < B; ++b)
          g.middleRows(b * rows, rows).rowwise() += (n->grad.row(b) / static_cast<float>(rows)).eval();
      };
    }
    return n;
  }

  // per-sample max over blocks of `rows` rows: [B*rows, C] -> [B, C]
  Node* block_max_rows(Node* a, long rows) {
    const long B = a->val.rows() / rows;
    Node* n = fresh();
    n->val.resize(B, a->val.cols());
    auto argmax = std::make_shared<Eigen::MatrixXi>(B, a->val.cols());
    for (long b = 0; b < B; ++b)
      for (long c = 0; c < a->val.cols(); ++c) {
        long best = 0;
        float bv = a->val(b * rows, c);
        for (long r = 1; r < rows; ++r)
          if (a->val(b * rows + r, c) > bv) {
            bv = a->val(b * rows + r, c);
            best = r;
          }
        n->val(b, c) = bv;
        (*argmax)(b, c) = static_cast<int>(best);
      }
    if (track(n, {a})) {
      n->back = [n, a, rows, B, argmax]() {
        Mat& g = ensure(a);
        for (long b = 0; b < B; ++b)
          for (long c = 0; c < a->val.cols(); ++c) g(b * rows + (*argmax)(b, c), c) += n->grad(b, c);
      };
    }
    return n;
  }

  // [B, C] -> [B*rows, C], each sample's row repeated
  Node* block_broadcast(Node* a, long rows) {
    const long B = a->val.rows();
    Node* n = fresh();
    n->val.resize(B * rows, a->val.cols());
    for (long b = 0; b < B; ++b) n->val.middleRows(b * rows, rows).rowwise() = a->val.row(b);
    if (track(n, {a})) {
      n->back = [n, a, rows, B]() {
        Mat& g = ensure(a);
        for (long b = 0; b < B; ++b) g.row(b) += n->grad.middleRows(b * rows, rows).colwise().sum();
      };
    }
    return n;
  }

  // mean over neighbor rows given a row-index table [N, k] (graph aggregation)
  Node* gather_rows_mean(Node* a, std::shared_ptr<Eigen::MatrixXi> idx) {
    Node* n = fresh();
    const long N = idx->rows(), k = idx->cols();
    n->val = Mat::Zero(N, a->val.cols());
    for (long i = 0; i < N; ++i) {
      for (long j = 0; j < k; ++j) n->val.row(i) += a->val.row((*idx)(i, j));
      n->val.row(i) /= static_cast<float>(k);
    }
    if (track(n, {a})) {
      n->back = [n, a, idx]() {
        Mat& g = ensure(a);
        const float inv_k = 1.0f / static_cast<float>(idx->cols());
        for (long i = 0; i < idx->rows(); ++i)
          for (long j = 0; j < idx->cols(); ++j) g.row((*idx)(i, j)) += n->grad.row(i) * inv_k;
      };
    }
    return n;
  }

  // L1 distance to a fixed target, averaged over elements -> [1, 1]
  // (reduction in double so finite-difference checks are not noise-limited)
  Node* l1_to(Node* a, const Mat& target) {
    Node* n = fresh();
    Mat diff = a->val - target;
    n->val = Mat::Constant(1, 1, static_cast<float>(diff.cast<double>().cwiseAbs().mean()));
    if (track(n, {a})) {
      n->back = [n, a, diff = std::move(diff)]() {
        const float k = n->grad(0, 0) / static_cast<float>(diff.size());
        ensure(a) += (diff.array().sign() * k).matrix();
      };
    }
    return n;
  }

  // binary cross-entropy with logits against fixed labels -> [1, 1]
  Node* bce_logits(Node* a, const Mat& labels) {
    Node* n = fresh();
    // stable form: max(x,0) - x*y + log(1+exp(-|x|))
    Eigen::ArrayXXf x = a->val.array();
    Eigen::ArrayXXf l = x.cwiseMax(0.0f) - x * labels.array() + (1.0f + (-x.abs()).exp()).log();
    n->val = Mat::Constant(1, 1, static_cast<float>(l.cast<double>().mean()));
    if (track(n, {a})) {
      n->back = [n, a, labels]() {
        const float k = n->grad(0, 0) / static_cast<float>(a->val.size());
        Eigen::ArrayXXf sg = 1.0f / (1.0f + (-a->val.array()).exp());
        ensure(a) += ((sg - labels.array()) * k).matrix();
      };
    }
    return n;
  }

  // 3x3 same-padding im2col: [B*H*W, C] -> [B*H*W, C*9]
  Node* im2col3(Node* a, long B, long H, long W) {
    const long C = a->val.cols();
    Node* n = fresh();
    n->val = Mat::Zero(B * H * W, C * 9);
    for (long b = 0; b < B; ++b)
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
          const long r = (b * H + y) * W + x;
          long slot = 0;
          for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx, ++slot) {
              const long yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              n->val.block(r, slot * C, 1, C) = a->val.block((b * H + yy) * W + xx, 0, 1, C);
            }
        }
    if (track(n, {a})) {
      n->back = [n, a, B, H, W, C]() {
        Mat& g = ensure(a);
        for (long b = 0; b < B; ++b)
          for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
              const long r = (b * H + y) * W + x;
              long slot = 0;
              for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx, ++slot) {
                  const long yy = y + dy, xx = x + dx;
                  if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                  g.block((b * H + yy) * W + xx, 0, 1, C) += n->grad.block(r, slot * C, 1, C);
                }
            }
      };
    }
    return n;
  }

  // 2x2 average pooling: [B*H*W, C] -> [B*(H/2)*(W/2), C]
  Node* avgpool2(Node* a, long B, long H, long W) {
    const long C = a->val.cols(), h = H / 2, w = W / 2;
    Node* n = fresh();
    n->val.resize(B * h * w, C);
    for (long b = 0; b < B; ++b)
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
          const long r = (b * h + y) * w + x;
          n->val.row(r) = 0.25f * (a->val.row((b * H + 2 * y) * W + 2 * x) + a->val.row((b * H + 2 * y) * W + 2 * x + 1) +
                                   a->val.row((b * H + 2 * y + 1) * W + 2 * x) +
                                   a->val.row((b * H + 2 * y + 1) * W + 2 * x + 1));
        }
    if (track(n, {a})) {
      n->back = [n, a, B, H, W, h, w]() {
        Mat& g = ensure(a);
        for (long b = 0; b < B; ++b)
          for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x) {
              const auto gr = (0.25f * n->grad.row((b * h + y) * w + x)).eval();
              g.row((b * H + 2 * y) * W + 2 * x) += gr;
              g.row((b * H + 2 * y) * W + 2 * x + 1) += gr;
              g.row((b * H + 2 * y + 1) * W + 2 * x) += gr;
              g.row((b * H + 2 * y + 1) * W + 2 * x + 1) += gr;
            }
      };
    }
    return n;
  }

  // nearest-neighbor 2x upsample: [B*h*w, C] -> [B*2h*2w, C]
  Node* upsample2(Node* a, long B, long h, long w) {
    const long H = 2 * h, W = 2 * w;
    Node* n = fresh();
    n->val.resize(B * H * W, a->val.cols());
    for (long b = 0; b < B; ++b)
      for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x)
          n->val.row((b * H + y) * W + x) = a->val.row((b * h + y / 2) * w + x / 2);
    if (track(n, {a})) {
      n->back = [n, a, B, h, w, H, W]() {
        Mat& g = ensure(a);
        for (long b = 0; b < B; ++b)
          for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) g.row((b * h + y / 2) * w + x / 2) += n->grad.row((b * H + y) * W + x);
      };
    }
    return n;
  }

  void backward(Node* loss) {
    if (!grad_) throw std::logic_error("tape: backward with gradients disabled");
    if (loss->val.size() != 1) throw std::logic_error("tape: backward expects a scalar loss");
    loss->grad = Mat::Ones(1, 1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node* n = it->get();
      if (n->requires_grad && n->back && n->grad.size() > 0) n->back();
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  Node* fresh() {
    nodes_.push_back(std::make_unique<Node>());
    return nodes_.back().get();
  }

  bool track(Node* n, const std::vector<Node*>& parents) {
    if (!grad_) return false;
    for (auto* p : parents)
      if (p->requires_grad) {
        n->requires_grad = true;
        return true;
      }
    return false;
  }

  static Mat& ensure(Node* p) {
    if (p->grad.size() == 0) p->grad = Mat::Zero(p->val.rows(), p->val.cols());
    return p->grad;
  }

  std::vector<std::unique_ptr<Node>> nodes_;
  bool grad_;
};

}  // namespace cadalign::nn
