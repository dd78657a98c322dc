/**
 * Copyright (c) The sitecl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SITECL_RNG_HPP
#define SITECL_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>

namespace sitecl {

/// Counter-based generator: draw n is a pure function of (key, n).
///
/// Streams for independent consumers are obtained with split(), which
/// derives a child key from the parent key and a tag. Splitting does not
/// depend on how many values the parent has already produced, so a stream
/// for (site, epoch, batch) can be re-derived anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Standard normal (Box-Muller; the second variate is cached).
  double normal();
  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  Rng split(std::uint64_t tag) const;
  Rng split(std::initializer_list<std::uint64_t> tags) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  bool operator==(const Rng&) const = default;

 private:
  Rng(std::uint64_t key, bool /*raw*/) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace sitecl

#endif  // SITECL_RNG_HPP
