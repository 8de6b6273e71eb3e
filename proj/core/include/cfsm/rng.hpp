// Copyright 2026 The CFSM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFSM_RNG_HPP_
#define CFSM_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace cfsm {

// Deterministic splitmix64 stream. Unlike the <random> engines/distributions,
// every sequence here is pinned by this code, so runs reproduce byte-for-byte
// across platforms and standard-library versions.
//
// Independent child streams are derived from (master seed, tag, index) with a
// counter-based scheme: splitting trace i's stream does not consume state from
// trace i+1's, so parallel and serial generation produce identical output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Uniform in [0, n); unbiased via rejection. n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  static std::uint64_t mix(std::uint64_t x);

  // FNV-1a over bytes; used to fold string tags into seeds.
  static std::uint64_t hash_tag(std::string_view tag);

  static Rng child(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t index);
  static Rng child(std::uint64_t master_seed, std::string_view tag, std::uint64_t index) {
    return child(master_seed, hash_tag(tag), index);
  }

 private:
  std::uint64_t state_;
};

}  // namespace cfsm

#endif  // CFSM_RNG_HPP_
