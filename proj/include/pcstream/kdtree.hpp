#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcstream/pointcloud.hpp"

namespace pcstream {

/// Exact nearest-neighbour index over integer voxel points. Leaves are
/// contiguous structure-of-arrays runs scanned with the dispatched SIMD kernel.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 32;

  explicit KdTree(std::span<const Point> points);

  std::size_t size() const noexcept { return xs_.size(); }
  bool empty() const noexcept { return xs_.empty(); }

  /// Squared distance to the nearest indexed point; +inf when empty.
  double nearest_sq_distance(const Point& query) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double split = 0;
    std::int8_t axis = -1;  // -1 for a leaf
  };

  std::int32_t build(std::vector<std::uint32_t>& order, std::span<const Point> points, std::uint32_t begin,
                     std::uint32_t end);

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> zs_;
  std::vector<Node> nodes_;
};

}  // namespace pcstream
