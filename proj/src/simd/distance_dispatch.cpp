#include <atomic>
#include <cstdlib>

#include "pcstream/simd/distance.hpp"

namespace pcstream::simd {
namespace {

using Kernel = double (*)(Query, PointBlock) noexcept;

Kernel kernel_for(Isa isa) noexcept {
  switch (isa) {
#if defined(PCSTREAM_HAVE_AVX2)
    case Isa::avx2:
      return &min_sq_distance_avx2;
#endif
#if defined(PCSTREAM_HAVE_NEON)
    case Isa::neon:
      return &min_sq_distance_neon;
#endif
    default:
      return &min_sq_distance_scalar;
  }
}

Isa default_isa() noexcept { return std::getenv("PCSTREAM_FORCE_SCALAR") ? Isa::scalar : detect_isa(); }

std::atomic<Isa>& active() noexcept {
  static std::atomic<Isa> isa{default_isa()};
  return isa;
}

}  // namespace

const char* to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "?";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(PCSTREAM_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(PCSTREAM_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() noexcept {
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

bool set_isa_override(std::optional<Isa> isa) noexcept {
  const Isa target = isa.value_or(default_isa());
  if (!isa_supported(target)) return false;
  active().store(target, std::memory_order_relaxed);
  return true;
}

double min_sq_distance(Query q, PointBlock block) noexcept { return kernel_for(active_isa())(q, block); }

}  // namespace pcstream::simd
