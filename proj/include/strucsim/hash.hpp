#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace strucsim {

/// 64-bit FNV-1a accumulator. Multi-byte values are fed in little-endian
/// order so fingerprints do not depend on the host byte order.
class Fnv1a {
 public:
  void add_bytes(const unsigned char* data, std::size_t size) {
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= data[i];
      state_ *= 0x100000001b3ULL;
    }
  }

  void add(std::string_view text) {
    add_bytes(reinterpret_cast<const unsigned char*>(text.data()), text.size());
  }

  void add(std::uint64_t value) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    add_bytes(bytes, 8);
  }

  void add(double value) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof bits);
    add(bits);
  }

  std::uint64_t value() const { return state_; }

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(state_ >> (4 * i)) & 0xf];
    return out;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Stable fingerprint of a dense matrix: shape followed by the entries in
/// column-major order.
template <typename Derived>
std::string matrix_fingerprint(const Eigen::MatrixBase<Derived>& m) {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(m.rows()));
  h.add(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) h.add(static_cast<double>(m(i, j)));
  }
  return h.hex();
}

inline std::string text_fingerprint(std::string_view text) {
  Fnv1a h;
  h.add(text);
  return h.hex();
}

}  // namespace strucsim
