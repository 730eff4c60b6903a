// Copyright 2026 The PI-GNN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIGNN_RNG_HPP_
#define PIGNN_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pignn {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a tuple of tags
/// (stage, snapshot, epoch, node, layer...). Order of tags matters.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t tag : tags) h = mix64(h ^ mix64(tag + 0x632be59bd9b4e019ULL));
  return h;
}

// Stage tags used when deriving seeds.
namespace seed_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kExpand = 2;
inline constexpr std::uint64_t kMemory = 3;
inline constexpr std::uint64_t kInitialEpoch = 4;
inline constexpr std::uint64_t kRectifyEpoch = 5;
inline constexpr std::uint64_t kIsolateEpoch = 6;
inline constexpr std::uint64_t kDistill = 7;
inline constexpr std::uint64_t kEval = 8;
inline constexpr std::uint64_t kNeighbors = 9;
}  // namespace seed_tag

}  // namespace pignn

#endif  // PIGNN_RNG_HPP_
