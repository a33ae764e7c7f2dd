#include "pcstream/codec.hpp"

#include <algorithm>
#include <string>

#include "pcstream/errors.hpp"

namespace pcstream {

Bytes encode_partition(const PointCloud& part) {
  if (part.resolution() > kMaxCodecResolution) {
    throw ValidationError("resolution " + std::to_string(part.resolution()) + " exceeds codec limit 65535");
  }
  if (part.size() > UINT32_MAX) throw ValidationError("partition too large for 32-bit point count");

  Bytes out(kPartitionMagic.begin(), kPartitionMagic.end());
  out.reserve(encoded_size(part.size()));
  out.push_back(static_cast<std::uint8_t>(CodecId::raw));
  put_le(out, part.frame_id());
  put_le(out, static_cast<std::uint32_t>(part.size()));
  put_le(out, static_cast<std::uint16_t>(part.resolution()));
  for (const Point& p : part.points()) {
    put_le(out, static_cast<std::uint16_t>(p.x));
    put_le(out, static_cast<std::uint16_t>(p.y));
    put_le(out, static_cast<std::uint16_t>(p.z));
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

PartitionHeader decode_partition_header(ByteView bytes) {
  if (bytes.size() < kPartitionHeaderSize) {
    throw DecodeError(DecodeErrc::short_buffer,
                      "partition header needs 19 bytes, got " + std::to_string(bytes.size()));
  }
  if (!std::equal(kPartitionMagic.begin(), kPartitionMagic.end(), bytes.begin())) {
    throw DecodeError(DecodeErrc::bad_magic, "partition does not start with PCS1");
  }
  if (bytes[4] != static_cast<std::uint8_t>(CodecId::raw)) {
    throw DecodeError(DecodeErrc::unknown_codec, "codec id " + std::to_string(bytes[4]));
  }
  PartitionHeader header;
  header.codec = CodecId::raw;
  header.frame_id = get_le<std::uint64_t>(bytes, 5);
  header.point_count = get_le<std::uint32_t>(bytes, 13);
  header.resolution = get_le<std::uint16_t>(bytes, 17);
  if (header.resolution == 0) throw DecodeError(DecodeErrc::invalid_field, "resolution 0");
  return header;
}

PointCloud decode_partition(ByteView bytes) {
  const PartitionHeader header = decode_partition_header(bytes);
  const std::size_t expected = encoded_size(header.point_count);
  if (bytes.size() != expected) {
    throw DecodeError(DecodeErrc::length_mismatch, "header claims " + std::to_string(header.point_count) +
                                                       " points (" + std::to_string(expected) + " bytes), buffer has " +
                                                       std::to_string(bytes.size()));
  }

  std::vector<Point> points(header.point_count);
  std::size_t offset = kPartitionHeaderSize;
  for (std::size_t i = 0; i < points.size(); ++i, offset += kPointRecordSize) {
    Point& p = points[i];
    p.x = get_le<std::uint16_t>(bytes, offset);
    p.y = get_le<std::uint16_t>(bytes, offset + 2);
    p.z = get_le<std::uint16_t>(bytes, offset + 4);
    p.r = bytes[offset + 6];
    p.g = bytes[offset + 7];
    p.b = bytes[offset + 8];
    if (p.x >= header.resolution || p.y >= header.resolution || p.z >= header.resolution) {
      throw DecodeError(DecodeErrc::invalid_field,
                        "point " + std::to_string(i) + " outside grid of side " + std::to_string(header.resolution));
    }
  }
  return PointCloud(header.resolution, header.frame_id, std::move(points));
}

}  // namespace pcstream
