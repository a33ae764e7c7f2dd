#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>
#include <vector>

namespace pcstream {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <typename T>
  requires std::is_unsigned_v<T>
void put_le(Bytes& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

// Caller guarantees `in.size() >= offset + sizeof(T)`.
template <typename T>
  requires std::is_unsigned_v<T>
T get_le(ByteView in, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(in[offset + i]) << (8 * i));
  }
  return value;
}

}  // namespace pcstream
