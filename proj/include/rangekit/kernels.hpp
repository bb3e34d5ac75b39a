#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the projection, scatter, and pooling
// paths. Each kernel exists as a scalar reference and, on x86 with AVX2, a
// vectorized variant; the top-level entry points dispatch once at startup.
// Both variants of a kernel produce bit-identical results: identical
// per-element operation order, no contraction (see -ffp-contract=off), and
// max defined as (a > b) ? a : b in both lanes.

namespace rangekit::kernels {

namespace scalar {
void point_ranges(const float* xs, const float* ys, const float* zs,
                  std::size_t n, float* out);
void channel_max(float* acc, const float* row, std::size_t c);
void kahan_add(float* sum, float* comp, const float* row, std::size_t c);
void scale(float* v, std::size_t n, float s);
void rotate_xy(float* xs, float* ys, std::size_t n, float cos_t, float sin_t);
}  // namespace scalar

#if defined(RANGEKIT_HAVE_AVX2)
namespace avx2 {
void point_ranges(const float* xs, const float* ys, const float* zs,
                  std::size_t n, float* out);
void channel_max(float* acc, const float* row, std::size_t c);
void kahan_add(float* sum, float* comp, const float* row, std::size_t c);
void scale(float* v, std::size_t n, float s);
void rotate_xy(float* xs, float* ys, std::size_t n, float cos_t, float sin_t);
}  // namespace avx2
#endif

// out[i] = sqrt(xs[i]^2 + ys[i]^2 + zs[i]^2)
void point_ranges(const float* xs, const float* ys, const float* zs,
                  std::size_t n, float* out);

// acc[i] = max(acc[i], row[i])
void channel_max(float* acc, const float* row, std::size_t c);

// Compensated accumulation: sum[i] += row[i] with carry kept in comp[i].
void kahan_add(float* sum, float* comp, const float* row, std::size_t c);

// v[i] *= s
void scale(float* v, std::size_t n, float s);

// In-place planar rotation: (x, y) -> (c*x - s*y, s*x + c*y)
void rotate_xy(float* xs, float* ys, std::size_t n, float cos_t, float sin_t);

// Name of the dispatched backend: "avx2" or "scalar".
const std::string& active_backend();

// True when the AVX2 variants were compiled in and the CPU supports them.
bool avx2_available();

}  // namespace rangekit::kernels
