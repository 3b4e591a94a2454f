#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadalign {

// Named-array container, the on-disk format for g-buffers, meshes and
// checkpoint weights. Layout (all integers little-endian, payloads tightly
// packed row-major):
//
//   magic "CADT" | u16 version=1 | u16 entry_count
//   entry := u16 name_len | name | u8 dtype | u8 ndim | u32 dims[ndim] | payload
//   dtype := 0 f32 | 1 f64 | 2 u16 | 3 i32 | 4 u8 | 5 i64
//
// See docs/FORMATS.md for the full description.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1, U16 = 2, I32 = 3, U8 = 4, I64 = 5 };

inline std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::U16: return 2;
    case Dtype::I32: return 4;
    case Dtype::U8: return 1;
    case Dtype::I64: return 8;
  }
  throw std::runtime_error("tensorfile: unknown dtype");
}

template <typename T> struct dtype_of;
template <> struct dtype_of<float> { static constexpr Dtype value = Dtype::F32; };
template <> struct dtype_of<double> { static constexpr Dtype value = Dtype::F64; };
template <> struct dtype_of<std::uint16_t> { static constexpr Dtype value = Dtype::U16; };
template <> struct dtype_of<std::int32_t> { static constexpr Dtype value = Dtype::I32; };
template <> struct dtype_of<std::uint8_t> { static constexpr Dtype value = Dtype::U8; };
template <> struct dtype_of<std::int64_t> { static constexpr Dtype value = Dtype::I64; };

struct TensorEntry {
  Dtype dtype = Dtype::F32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  template <typename T>
  std::vector<T> as() const {
    if (dtype != dtype_of<T>::value) throw std::runtime_error("tensorfile: dtype mismatch");
    std::vector<T> out(count());
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
  }
};

class TensorFile {
 public:
  template <typename T>
  void add(const std::string& name, const std::vector<std::uint32_t>& dims, const T* data) {
    TensorEntry e;
    e.dtype = dtype_of<T>::value;
    e.dims = dims;
    e.bytes.resize(e.count() * sizeof(T));
    std::memcpy(e.bytes.data(), data, e.bytes.size());
    if (entries_.count(name)) throw std::runtime_error("tensorfile: duplicate entry " + name);
    order_.push_back(name);
    entries_.emplace(name, std::move(e));
  }

  template <typename T>
  void add(const std::string& name, const std::vector<std::uint32_t>& dims, const std::vector<T>& v) {
    add(name, dims, v.data());
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  const TensorEntry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("tensorfile: missing entry " + name);
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("tensorfile: cannot open for write: " + path);
    f.write("CADT", 4);
    write_u16(f, 1);
    write_u16(f, static_cast<std::uint16_t>(order_.size()));
    for (const auto& name : order_) {
      const TensorEntry& e = entries_.at(name);
      write_u16(f, static_cast<std::uint16_t>(name.size()));
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      const std::uint8_t dt = static_cast<std::uint8_t>(e.dtype);
      f.write(reinterpret_cast<const char*>(&dt), 1);
      const std::uint8_t nd = static_cast<std::uint8_t>(e.dims.size());
      f.write(reinterpret_cast<const char*>(&nd), 1);
      for (auto d : e.dims) write_u32(f, d);
      f.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
    }
    if (!f) throw std::runtime_error("tensorfile: write failed: " + path);
  }

  static TensorFile load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("tensorfile: cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "CADT", 4) != 0) throw std::runtime_error("tensorfile: bad magic: " + path);
    const std::uint16_t version = read_u16(f);
    if (version != 1) throw std::runtime_error("tensorfile: unsupported version");
    const std::uint16_t n = read_u16(f);
    TensorFile out;
    for (int i = 0; i < n; ++i) {
      const std::uint16_t name_len = read_u16(f);
      std::string name(name_len, '\0');
      f.read(name.data(), name_len);
      TensorEntry e;
      std::uint8_t dt = 0, nd = 0;
      f.read(reinterpret_cast<char*>(&dt), 1);
      f.read(reinterpret_cast<char*>(&nd), 1);
      e.dtype = static_cast<Dtype>(dt);
      e.dims.resize(nd);
      for (auto& d : e.dims) d = read_u32(f);
      e.bytes.resize(e.count() * dtype_size(e.dtype));
      f.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
      if (!f) throw std::runtime_error("tensorfile: truncated file: " + path);
      out.order_.push_back(name);
      out.entries_.emplace(name, std::move(e));
    }
    return out;
  }

 private:
  static void write_u16(std::ofstream& f, std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); }
  static void write_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
  static std::uint16_t read_u16(std::ifstream& f) {
    std::uint16_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 2);
    return v;
  }
  static std::uint32_t read_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }

  std::vector<std::string> order_;
  std::map<std::string, TensorEntry> entries_;
};

}  // namespace cadalign
