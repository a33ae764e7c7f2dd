#pragma once

#include <array>
#include <cstdint>

#include "pcstream/bytes.hpp"
#include "pcstream/pointcloud.hpp"

namespace pcstream {

// Encoded partition layout (little-endian):
//   magic "PCS1" | codec_id u8 | frame_id u64 | point_count u32 | resolution u16
// followed, for codec 0, by point_count records of x,y,z (u16) and r,g,b (u8).
inline constexpr std::array<std::uint8_t, 4> kPartitionMagic = {'P', 'C', 'S', '1'};
inline constexpr std::size_t kPartitionHeaderSize = 19;
inline constexpr std::size_t kPointRecordSize = 9;
inline constexpr std::uint32_t kMaxCodecResolution = 65535;

enum class CodecId : std::uint8_t { raw = 0 };

struct PartitionHeader {
  CodecId codec = CodecId::raw;
  std::uint64_t frame_id = 0;
  std::uint32_t point_count = 0;
  std::uint16_t resolution = 0;

  friend bool operator==(const PartitionHeader&, const PartitionHeader&) = default;
};

constexpr std::size_t encoded_size(std::size_t points) { return kPartitionHeaderSize + kPointRecordSize * points; }

/// Lossless, order-preserving. Throws ValidationError if resolution exceeds 65535.
Bytes encode_partition(const PointCloud& part);

/// Validates magic, codec id, length and point bounds; throws DecodeError.
PartitionHeader decode_partition_header(ByteView bytes);
PointCloud decode_partition(ByteView bytes);

}  // namespace pcstream
