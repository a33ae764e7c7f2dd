#include <immintrin.h>

#include <algorithm>
#include <limits>

#include "pcstream/simd/distance.hpp"

namespace pcstream::simd {

double min_sq_distance_avx2(Query q, PointBlock block) noexcept {
  const __m256d qx = _mm256_set1_pd(q.x);
  const __m256d qy = _mm256_set1_pd(q.y);
  const __m256d qz = _mm256_set1_pd(q.z);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());

  std::size_t i = 0;
  for (; i + 4 <= block.n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(block.x + i), qx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(block.y + i), qy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(block.z + i), qz);
    const __m256d xy = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    best = _mm256_min_pd(best, _mm256_add_pd(xy, _mm256_mul_pd(dz, dz)));
  }

  const __m128d half = _mm_min_pd(_mm256_castpd256_pd128(best), _mm256_extractf128_pd(best, 1));
  double result = _mm_cvtsd_f64(_mm_min_sd(half, _mm_unpackhi_pd(half, half)));

  for (; i < block.n; ++i) {
    const double dx = block.x[i] - q.x;
    const double dy = block.y[i] - q.y;
    const double dz = block.z[i] - q.z;
    result = std::min(result, (dx * dx + dy * dy) + dz * dz);
  }
  return result;
}

}  // namespace pcstream::simd
