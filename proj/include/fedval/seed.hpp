#pragma once

#include <cstdint>
#include <initializer_list>

namespace fedval {

using Seed = std::uint64_t;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a list of tags,
// e.g. derive_seed(master, {client_id, round}). Adding a tag for one client
// never changes the stream of another.
constexpr Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(base);
  for (auto t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream tags, so that the same (master, id) pair used for different
// purposes yields unrelated streams.
namespace stream {
inline constexpr std::uint64_t kSplit = 0x51;
inline constexpr std::uint64_t kPartition = 0x9a;
inline constexpr std::uint64_t kSkew = 0x5e;
inline constexpr std::uint64_t kTrain = 0x7f;
}  // namespace stream

}  // namespace fedval
