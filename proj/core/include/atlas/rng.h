// Copyright 2026 The Atlas Audit Authors
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

#ifndef ATLAS_RNG_H_
#define ATLAS_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace atlas {

// Seedable generator with portable draws.
//
// std::mt19937_64 and std::seed_seq are fully specified by the standard, but
// the <random> distributions are not, so bounded integers, uniforms and
// normals are derived here to keep runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream keyed by the root seed plus any number of tags, e.g.
  // (seed, year, draw index). Streams do not depend on creation order.
  static Rng Substream(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> tags);

  std::uint64_t NextU64() { return engine_(); }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t UniformIndex(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform();

  // Standard normal via Box-Muller; caches the second variate.
  double Normal();

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace atlas

#endif  // ATLAS_RNG_H_
