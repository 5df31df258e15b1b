#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace vauq {

/// 64-bit FNV-1a. Stable across platforms, used for cache keys and params hashes.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001B3ULL;
    }
    return *this;
  }
  /// Appends a field followed by a unit separator so ("ab","c") != ("a","bc").
  Fnv1a& field(std::string_view bytes) { return update(bytes).update("\x1f"); }

  std::uint64_t value() const { return state_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

/// Shortest round-trip text for a double, for canonical strings.
inline std::string canonical_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace vauq
