#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cadalign {

// Dense H x W x C raster, row-major (v, u, c). Depth maps are Image<float>
// with one channel, NOC/normal maps have three, instance masks are
// Image<std::uint16_t>.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, T fill = T{}) : w_(width), h_(height), c_(channels) {
    if (width < 0 || height < 0 || channels <= 0) throw std::invalid_argument("Image: bad dimensions");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return w_; }
  int height() const { return h_; }
  int channels() const { return c_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int u, int v, int c = 0) {
    assert(u >= 0 && u < w_ && v >= 0 && v < h_ && c >= 0 && c < c_);
    return data_[(static_cast<std::size_t>(v) * w_ + u) * c_ + c];
  }
  const T& at(int u, int v, int c = 0) const {
    assert(u >= 0 && u < w_ && v >= 0 && v < h_ && c >= 0 && c < c_);
    return data_[(static_cast<std::size_t>(v) * w_ + u) * c_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_shape(const Image& o) const { return w_ == o.w_ && h_ == o.h_ && c_ == o.c_; }

  bool operator==(const Image& o) const {
    return w_ == o.w_ && h_ == o.h_ && c_ == o.c_ && data_ == o.data_;
  }

 private:
  int w_ = 0, h_ = 0, c_ = 0;
  std::vector<T> data_;
};

using DepthMap = Image<double>;   // meters; double keeps Hadamard-ratio math exact
using NocMap = Image<float>;      // 3 channels, canonical coordinates
using NormalMap = Image<float>;   // 3 channels, camera frame
using InstanceMask = Image<std::uint16_t>;  // 0 = background, ids start at 1

}  // namespace cadalign
