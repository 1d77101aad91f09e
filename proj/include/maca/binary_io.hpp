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

#ifndef MACA_BINARY_IO_HPP_
#define MACA_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "maca/error.hpp"

namespace maca::io {

// Little-endian primitives, independent of host byte order.

template <class U>
void put_uint(std::ostream& os, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(bytes, sizeof(U));
}

template <class U>
U get_uint(std::istream& is) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError("unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

inline void put_f32(std::ostream& os, float f) { put_uint<std::uint32_t>(os, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_uint<std::uint32_t>(is)); }

inline void put_u16(std::ostream& os, std::uint16_t v) { put_uint(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_uint(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_uint(os, v); }
inline std::uint16_t get_u16(std::istream& is) { return get_uint<std::uint16_t>(is); }
inline std::uint32_t get_u32(std::istream& is) { return get_uint<std::uint32_t>(is); }
inline std::uint64_t get_u64(std::istream& is) { return get_uint<std::uint64_t>(is); }

}  // namespace maca::io

#endif  // MACA_BINARY_IO_HPP_
