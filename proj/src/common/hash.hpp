#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace gbias {

// 64-bit FNV-1a. Stable across platforms and runs; used for sentence ids,
// cache keys and input fingerprints.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= kPrime;
    }
    return *this;
  }
  // Field separator so ("ab","c") and ("a","bc") hash differently.
  Fnv1a& field(std::string_view bytes) noexcept {
    update(bytes);
    const char sep = '\x1f';
    return update(std::string_view(&sep, 1));
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t state_ = kOffset;
};

std::uint64_t hash_fields(std::initializer_list<std::string_view> fields);
std::string to_hex(std::uint64_t value);
std::string hash_hex(std::initializer_list<std::string_view> fields);

// Hash of a file's full contents, hex encoded.
std::string file_hash_hex(const std::string& path);

// Uniform double in [0,1) derived from a 64-bit hash (splitmix64 finalizer
// applied first so nearby hashes decorrelate).
double hash_uniform(std::uint64_t h) noexcept;

}  // namespace gbias
