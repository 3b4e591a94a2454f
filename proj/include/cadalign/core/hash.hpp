#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace cadalign {

// 64-bit FNV-1a. Used for config and artifact content hashes (reproducibility
// checks, not security).
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ull;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }

  std::uint64_t value() const { return h_; }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h_));
    return std::string(buf);
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::string hash_bytes_hex(const void* data, std::size_t n) {
  Fnv1a h;
  h.update(data, n);
  return h.hex();
}

inline std::string hash_string_hex(const std::string& s) { return hash_bytes_hex(s.data(), s.size()); }

inline std::string hash_file_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::string();
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  return h.hex();
}

}  // namespace cadalign
