#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace pcstream {

inline constexpr std::uint32_t kDefaultResolution = 512;

struct Point {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t z = 0;
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// One voxelized frame. Immutable once constructed; the constructor rejects
/// any point outside [0, resolution)^3 with a ValidationError naming its index.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::uint32_t resolution, std::uint64_t frame_id, std::vector<Point> points);

  std::uint32_t resolution() const noexcept { return resolution_; }
  std::uint64_t frame_id() const noexcept { return frame_id_; }
  std::span<const Point> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::uint32_t resolution_ = kDefaultResolution;
  std::uint64_t frame_id_ = 0;
  std::vector<Point> points_;
};

/// Order-insensitive equality of the point multisets (ignores frame id and resolution).
bool same_multiset(std::span<const Point> a, std::span<const Point> b);

/// Uniform random cloud: coordinates over the grid, colors over 0..255.
/// Pure function of its arguments.
PointCloud generate_synthetic(std::size_t n, std::uint32_t resolution, std::uint64_t seed,
                              std::uint64_t frame_id = 0);

}  // namespace pcstream
