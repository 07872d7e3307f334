#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "common/hash.hpp"

namespace gbias {

// std::uniform_*_distribution output differs between standard libraries, so
// every seeded draw in the toolkit goes through these.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

// Independent stream per (seed, tag) so parallel and serial runs agree.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  Fnv1a h;
  h.field(std::to_string(seed)).field(tag);
  return h.digest();
}

}  // namespace gbias
