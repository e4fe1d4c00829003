#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace addrate {

// All randomness fans out from one base seed through named substreams
// ("module:purpose:index"), so any replicate can be regenerated in isolation
// and workers never share generator state. Streams are deterministic for a
// given standard library; bit-identity across toolchains is not promised.

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline std::uint64_t substream_seed(std::uint64_t base, std::string_view name,
                                    std::uint64_t index = 0) noexcept {
  const std::uint64_t x = detail::splitmix64(base ^ detail::fnv1a64(name));
  return detail::splitmix64(x ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
}

inline std::mt19937_64 make_stream(std::uint64_t base, std::string_view name,
                                   std::uint64_t index = 0) {
  return std::mt19937_64{substream_seed(base, name, index)};
}

}  // namespace addrate
