#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "pcstream/pointcloud.hpp"

namespace pcstream {

enum class PlyFormat { ascii, binary_little_endian };

struct PlyLoadOptions {
  // Overrides any `comment resolution N` header line; default 512 when neither is present.
  std::optional<std::uint32_t> resolution;
  std::optional<std::uint64_t> frame_id;
};

/// Reads the vertex element of an ascii or binary-little-endian PLY file.
/// Positions must be integral and inside the grid; colors may be spelled
/// r/g/b or red/green/blue and must be 8-bit. Throws ParseError on a bad
/// header or truncated body, ValidationError for a bad vertex.
PointCloud load_ply(const std::filesystem::path& path, const PlyLoadOptions& options = {});

/// Writes resolution and frame id as header comments so load_ply restores them.
void save_ply(const PointCloud& cloud, const std::filesystem::path& path,
              PlyFormat format = PlyFormat::binary_little_endian);

}  // namespace pcstream
