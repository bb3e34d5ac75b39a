#if defined(RANGEKIT_HAVE_AVX2)

#include <immintrin.h>

#include "rangekit/kernels.hpp"

namespace rangekit::kernels::avx2 {

void point_ranges(const float* xs, const float* ys, const float* zs,
                  std::size_t n, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 x = _mm256_loadu_ps(xs + i);
    __m256 y = _mm256_loadu_ps(ys + i);
    __m256 z = _mm256_loadu_ps(zs + i);
    __m256 sq = _mm256_add_ps(
        _mm256_add_ps(_mm256_mul_ps(x, x), _mm256_mul_ps(y, y)),
        _mm256_mul_ps(z, z));
    _mm256_storeu_ps(out + i, _mm256_sqrt_ps(sq));
  }
  scalar::point_ranges(xs + i, ys + i, zs + i, n - i, out + i);
}

void channel_max(float* acc, const float* row, std::size_t c) {
  std::size_t i = 0;
  for (; i + 8 <= c; i += 8) {
    __m256 a = _mm256_loadu_ps(acc + i);
    __m256 r = _mm256_loadu_ps(row + i);
    _mm256_storeu_ps(acc + i, _mm256_max_ps(a, r));
  }
  scalar::channel_max(acc + i, row + i, c - i);
}

void kahan_add(float* sum, float* comp, const float* row, std::size_t c) {
  std::size_t i = 0;
  for (; i + 8 <= c; i += 8) {
    __m256 s = _mm256_loadu_ps(sum + i);
    __m256 cm = _mm256_loadu_ps(comp + i);
    __m256 r = _mm256_loadu_ps(row + i);
    __m256 y = _mm256_sub_ps(r, cm);
    __m256 t = _mm256_add_ps(s, y);
    _mm256_storeu_ps(comp + i, _mm256_sub_ps(_mm256_sub_ps(t, s), y));
    _mm256_storeu_ps(sum + i, t);
  }
  scalar::kahan_add(sum + i, comp + i, row + i, c - i);
}

void scale(float* v, std::size_t n, float s) {
  __m256 f = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(v + i, _mm256_mul_ps(_mm256_loadu_ps(v + i), f));
  }
  scalar::scale(v + i, n - i, s);
}

void rotate_xy(float* xs, float* ys, std::size_t n, float cos_t, float sin_t) {
  __m256 c = _mm256_set1_ps(cos_t);
  __m256 s = _mm256_set1_ps(sin_t);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 x = _mm256_loadu_ps(xs + i);
    __m256 y = _mm256_loadu_ps(ys + i);
    _mm256_storeu_ps(xs + i,
                     _mm256_sub_ps(_mm256_mul_ps(c, x), _mm256_mul_ps(s, y)));
    _mm256_storeu_ps(ys + i,
                     _mm256_add_ps(_mm256_mul_ps(s, x), _mm256_mul_ps(c, y)));
  }
  scalar::rotate_xy(xs + i, ys + i, n - i, cos_t, sin_t);
}

}  // namespace rangekit::kernels::avx2

#endif  // RANGEKIT_HAVE_AVX2
