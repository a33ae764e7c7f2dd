#include <limits>

#include "pcstream/simd/distance.hpp"

namespace pcstream::simd {

double min_sq_distance_scalar(Query q, PointBlock block) noexcept {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < block.n; ++i) {
    const double dx = block.x[i] - q.x;
    const double dy = block.y[i] - q.y;
    const double dz = block.z[i] - q.z;
    const double d = (dx * dx + dy * dy) + dz * dz;
    if (d < best) best = d;
  }
  return best;
}

}  // namespace pcstream::simd
