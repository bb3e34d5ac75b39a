#include "rangekit/kernels.hpp"

#include <cmath>

namespace rangekit::kernels::scalar {

void point_ranges(const float* xs, const float* ys, const float* zs,
                  std::size_t n, float* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::sqrt((xs[i] * xs[i] + ys[i] * ys[i]) + zs[i] * zs[i]);
  }
}

void channel_max(float* acc, const float* row, std::size_t c) {
  // Mirrors vmaxps semantics: second operand wins on unordered compares.
  for (std::size_t i = 0; i < c; ++i) {
    acc[i] = (acc[i] > row[i]) ? acc[i] : row[i];
  }
}

void kahan_add(float* sum, float* comp, const float* row, std::size_t c) {
  for (std::size_t i = 0; i < c; ++i) {
    float y = row[i] - comp[i];
    float t = sum[i] + y;
    comp[i] = (t - sum[i]) - y;
    sum[i] = t;
  }
}

void scale(float* v, std::size_t n, float s) {
  for (std::size_t i = 0; i < n; ++i) v[i] *= s;
}

void rotate_xy(float* xs, float* ys, std::size_t n, float cos_t, float sin_t) {
  for (std::size_t i = 0; i < n; ++i) {
    float x = xs[i];
    float y = ys[i];
    xs[i] = cos_t * x - sin_t * y;
    ys[i] = sin_t * x + cos_t * y;
  }
}

}  // namespace rangekit::kernels::scalar
