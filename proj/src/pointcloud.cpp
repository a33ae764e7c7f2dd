#include "pcstream/pointcloud.hpp"

#include <algorithm>
#include <string>

#include "pcstream/errors.hpp"
#include "pcstream/random.hpp"

namespace pcstream {

PointCloud::PointCloud(std::uint32_t resolution, std::uint64_t frame_id, std::vector<Point> points)
    : resolution_(resolution), frame_id_(frame_id), points_(std::move(points)) {
  if (resolution_ == 0) throw ValidationError("point cloud resolution must be positive");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Point& p = points_[i];
    if (p.x >= resolution_ || p.y >= resolution_ || p.z >= resolution_) {
      throw ValidationError("point " + std::to_string(i) + " (" + std::to_string(p.x) + "," +
                                std::to_string(p.y) + "," + std::to_string(p.z) +
                                ") outside grid of side " + std::to_string(resolution_),
                            i);
    }
  }
}

bool same_multiset(std::span<const Point> a, std::span<const Point> b) {
  if (a.size() != b.size()) return false;
  std::vector<Point> sa(a.begin(), a.end());
  std::vector<Point> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return sa == sb;
}

PointCloud generate_synthetic(std::size_t n, std::uint32_t resolution, std::uint64_t seed,
                              std::uint64_t frame_id) {
  if (resolution == 0) throw ValidationError("synthetic resolution must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Point> points(n);
  for (Point& p : points) {
    p.x = static_cast<std::uint32_t>(uniform_below(rng, resolution));
    p.y = static_cast<std::uint32_t>(uniform_below(rng, resolution));
    p.z = static_cast<std::uint32_t>(uniform_below(rng, resolution));
    p.r = static_cast<std::uint8_t>(uniform_below(rng, 256));
    p.g = static_cast<std::uint8_t>(uniform_below(rng, 256));
    p.b = static_cast<std::uint8_t>(uniform_below(rng, 256));
  }
  return PointCloud(resolution, frame_id, std::move(points));
}

}  // namespace pcstream
