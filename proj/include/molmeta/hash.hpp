#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace molmeta {

// FNV-1a, 64-bit. Fixed constants so hashes agree across processes and
// platforms.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a64& bytes(std::span<const std::uint8_t> data) {
    for (std::uint8_t b : data) {
      state_ ^= b;
      state_ *= kPrime;
    }
    return *this;
  }

  // Little-endian encoding regardless of host byte order.
  Fnv1a64& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= static_cast<std::uint8_t>(v >> (8 * i));
      state_ *= kPrime;
    }
    return *this;
  }

  Fnv1a64& str(std::string_view s) {
    u64(s.size());
    for (char c : s) {
      state_ ^= static_cast<std::uint8_t>(c);
      state_ *= kPrime;
    }
    return *this;
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

}  // namespace molmeta
