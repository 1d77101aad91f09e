/*
 * Copyright 2026 The maca Authors
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

#ifndef MACA_RANDOM_HPP_
#define MACA_RANDOM_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace maca {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream...) so that parallel or reordered
/// work draws the same numbers.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::seed_seq::result_type words[16];
  std::size_t n = 0;
  auto push = [&](std::uint64_t v) {
    words[n++] = static_cast<std::seed_seq::result_type>(v & 0xffffffffu);
    words[n++] = static_cast<std::seed_seq::result_type>(v >> 32);
  };
  push(seed);
  for (std::uint64_t s : stream) {
    if (n + 2 > std::size(words)) break;
    push(s);
  }
  std::seed_seq seq(words, words + n);
  return Rng(seq);
}

}  // namespace maca

#endif  // MACA_RANDOM_HPP_
