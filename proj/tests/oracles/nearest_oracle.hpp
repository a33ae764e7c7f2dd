#pragma once

// All-pairs nearest neighbour in exact integer arithmetic.

#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

struct P3 {
  std::int64_t x, y, z;
};

inline std::int64_t nearest_sq(const P3& q, const std::vector<P3>& pts) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (const P3& p : pts) {
    const std::int64_t dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
    const std::int64_t d = dx * dx + dy * dy + dz * dz;
    if (d < best) best = d;
  }
  return best;
}

// Mean over `from` of the squared distance to `to`, as numerator/denominator.
struct Ratio {
  std::int64_t num;
  std::int64_t den;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Ratio directional(const std::vector<P3>& from, const std::vector<P3>& to) {
  std::int64_t sum = 0;
  for (const P3& q : from) sum += nearest_sq(q, to);
  return {sum, static_cast<std::int64_t>(from.size())};
}

}  // namespace oracle
