#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nrdectl {

/// SplitMix64 finaliser; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for the `index`-th stream labelled `tag` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ hash_tag(tag)) + mix64(index + 0x632be59bd9b4e019ULL));
}

/// Independent generator for trajectory `index` of stream `seed`.
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(mix64(seed) ^ mix64(index * 0xd1342543de82ef95ULL + 1));
}

}  // namespace nrdectl
