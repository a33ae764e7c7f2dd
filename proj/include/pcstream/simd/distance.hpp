#pragma once

#include <cstddef>
#include <optional>

namespace pcstream::simd {

enum class Isa { scalar, avx2, neon };

const char* to_string(Isa isa) noexcept;

/// Structure-of-arrays view over `n` points.
struct PointBlock {
  const double* x = nullptr;
  const double* y = nullptr;
  const double* z = nullptr;
  std::size_t n = 0;
};

struct Query {
  double x = 0;
  double y = 0;
  double z = 0;
};

/// Minimum squared Euclidean distance from `q` to any point of `block`;
/// +inf for an empty block. All variants evaluate (dx*dx + dy*dy) + dz*dz per
/// point without fused multiply-add, so they agree bit for bit.
double min_sq_distance_scalar(Query q, PointBlock block) noexcept;
#if defined(PCSTREAM_HAVE_AVX2)
double min_sq_distance_avx2(Query q, PointBlock block) noexcept;
#endif
#if defined(PCSTREAM_HAVE_NEON)
double min_sq_distance_neon(Query q, PointBlock block) noexcept;
#endif

/// Best variant this CPU supports.
Isa detect_isa() noexcept;
bool isa_supported(Isa isa) noexcept;

/// Variant used by min_sq_distance. Defaults to detect_isa(), or to scalar
/// when the PCSTREAM_FORCE_SCALAR environment variable is set.
Isa active_isa() noexcept;
/// Pins the dispatched variant (nullopt restores the default). Returns false,
/// changing nothing, if the CPU lacks `isa`.
bool set_isa_override(std::optional<Isa> isa) noexcept;

double min_sq_distance(Query q, PointBlock block) noexcept;

}  // namespace pcstream::simd
