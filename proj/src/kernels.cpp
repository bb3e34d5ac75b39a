#include "rangekit/kernels.hpp"

namespace rangekit::kernels {

namespace {

using PointRangesFn = void (*)(const float*, const float*, const float*,
                               std::size_t, float*);
using ChannelMaxFn = void (*)(float*, const float*, std::size_t);
using KahanAddFn = void (*)(float*, float*, const float*, std::size_t);
using ScaleFn = void (*)(float*, std::size_t, float);
using RotateXyFn = void (*)(float*, float*, std::size_t, float, float);

struct Dispatch {
  PointRangesFn point_ranges = scalar::point_ranges;
  ChannelMaxFn channel_max = scalar::channel_max;
  KahanAddFn kahan_add = scalar::kahan_add;
  ScaleFn scale = scalar::scale;
  RotateXyFn rotate_xy = scalar::rotate_xy;
  std::string backend = "scalar";
};

Dispatch make_dispatch() {
  Dispatch d;
#if defined(RANGEKIT_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) {
    d.point_ranges = avx2::point_ranges;
    d.channel_max = avx2::channel_max;
    d.kahan_add = avx2::kahan_add;
    d.scale = avx2::scale;
    d.rotate_xy = avx2::rotate_xy;
    d.backend = "avx2";
  }
#endif
  return d;
}

const Dispatch& dispatch() {
  static const Dispatch d = make_dispatch();
  return d;
}

}  // namespace

void point_ranges(const float* xs, const float* ys, const float* zs,
                  std::size_t n, float* out) {
  dispatch().point_ranges(xs, ys, zs, n, out);
}

void channel_max(float* acc, const float* row, std::size_t c) {
  dispatch().channel_max(acc, row, c);
}

void kahan_add(float* sum, float* comp, const float* row, std::size_t c) {
  dispatch().kahan_add(sum, comp, row, c);
}

void scale(float* v, std::size_t n, float s) { dispatch().scale(v, n, s); }

void rotate_xy(float* xs, float* ys, std::size_t n, float cos_t, float sin_t) {
  dispatch().rotate_xy(xs, ys, n, cos_t, sin_t);
}

const std::string& active_backend() { return dispatch().backend; }

bool avx2_available() { return dispatch().backend == "avx2"; }

}  // namespace rangekit::kernels
