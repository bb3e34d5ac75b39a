#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rangekit {

// Thrown for malformed inputs (files, CLI arguments). CLI maps it to exit 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an internal contract is violated. CLI maps it to exit 3.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kPi = 3.14159265358979323846;

// Wraps an angle to (-pi, pi].
inline double wrap_to_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Wraps an angle to [0, 2*pi).
inline double wrap_to_two_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

// Single LIDAR return in the sensor frame (x forward, y left, z up).
struct LidarPoint {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;
  float elongation = 0.0f;  // Waymo only; 0 when the sensor does not report it
};

using PointCloud = std::vector<LidarPoint>;

// Oriented 3D bounding box. `length` runs along the heading axis, yaw rotates
// about +z measured from +x and is kept in (-pi, pi].
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double yaw = 0.0;

  Box3D() = default;
  Box3D(double cx_, double cy_, double cz_, double l, double w, double h,
        double yaw_)
      : cx(cx_), cy(cy_), cz(cz_), length(l), width(w), height(h),
        yaw(wrap_to_pi(yaw_)) {}

  double volume() const { return length * width * height; }
  double bev_area() const { return length * width; }
  bool degenerate() const {
    return !(length > 0.0) || !(width > 0.0) || !(height > 0.0);
  }
};

struct Detection {
  Box3D box;
  double score = 0.0;
  std::string label = "Car";
};

// Dense row-major (h, w, c) float tensor, c fastest.
class Tensor3f {
 public:
  Tensor3f() = default;
  Tensor3f(int h, int w, int c, float fill = 0.0f)
      : h_(h), w_(w), c_(c), data_(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 0 || w < 0 || c < 0)
      throw InvariantError("Tensor3f: negative dimension");
  }

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  // Pointer to the channel vector of pixel (y, x).
  float* pixel(int y, int x) { return data_.data() + index(y, x, 0); }
  const float* pixel(int y, int x) const { return data_.data() + index(y, x, 0); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  bool same_shape(const Tensor3f& o) const {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * w_ + x) * c_ + c;
  }
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<float> data_;
};

}  // namespace rangekit
