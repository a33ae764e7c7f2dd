#include <arm_neon.h>

#include <algorithm>
#include <limits>

#include "pcstream/simd/distance.hpp"

namespace pcstream::simd {

double min_sq_distance_neon(Query q, PointBlock block) noexcept {
  const float64x2_t qx = vdupq_n_f64(q.x);
  const float64x2_t qy = vdupq_n_f64(q.y);
  const float64x2_t qz = vdupq_n_f64(q.z);
  float64x2_t best = vdupq_n_f64(std::numeric_limits<double>::infinity());

  std::size_t i = 0;
  for (; i + 2 <= block.n; i += 2) {
    const float64x2_t dx = vsubq_f64(vld1q_f64(block.x + i), qx);
    const float64x2_t dy = vsubq_f64(vld1q_f64(block.y + i), qy);
    const float64x2_t dz = vsubq_f64(vld1q_f64(block.z + i), qz);
    const float64x2_t xy = vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy));
    best = vminq_f64(best, vaddq_f64(xy, vmulq_f64(dz, dz)));
  }
  double result = vminvq_f64(best);

  for (; i < block.n; ++i) {
    const double dx = block.x[i] - q.x;
    const double dy = block.y[i] - q.y;
    const double dz = block.z[i] - q.z;
    result = std::min(result, (dx * dx + dy * dy) + dz * dz);
  }
  return result;
}

}  // namespace pcstream::simd
