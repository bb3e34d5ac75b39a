#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rangekit/types.hpp"

namespace rangekit {

enum class Channel : uint8_t { Range, X, Y, Z, Intensity, Elongation };

const char* channel_name(Channel c);

// Geometry of the spherical projection. A point maps to
//   u = 0.5 * [1 - atan2(y, x) / azimuth_half_fov] * width
//   v = [1 - (asin(z / r) + fov_down) / (fov_up + fov_down)] * height
// With azimuth_half_fov = pi this covers the full ring; the KITTI preset
// narrows it to pi/4 so the 512 columns span the labeled 90 degree sector.
struct ProjectionSpec {
  int width = 512;
  int height = 48;
  double fov_up = 3.0 * kPi / 180.0;
  double fov_down = 25.0 * kPi / 180.0;  // positive magnitude
  double azimuth_half_fov = kPi;
  std::vector<Channel> channels = {Channel::Range, Channel::X, Channel::Y,
                                   Channel::Z, Channel::Intensity};
  // Points whose azimuth falls outside +-azimuth_half_fov are never
  // projected. Only meaningful for sector images.
  bool drop_outside_azimuth = false;
  // Clamp points outside the vertical field of view into the edge rows
  // (default) or drop them entirely.
  bool drop_outside_vertical_fov = false;

  int channel_count() const { return static_cast<int>(channels.size()); }
  double vertical_fov() const { return fov_up + fov_down; }
  void validate() const;

  static ProjectionSpec kitti();
  static ProjectionSpec waymo();
};

// Dense multi-channel image. Invalid pixels carry -1 in every channel.
struct RangeImage {
  Tensor3f data;                // (height, width, C)
  std::vector<uint8_t> valid;   // height * width
  std::vector<Channel> channels;

  int height() const { return data.height(); }
  int width() const { return data.width(); }
  int channel_count() const { return data.channels(); }
  bool is_valid(int v, int u) const {
    return valid[static_cast<std::size_t>(v) * width() + u] != 0;
  }
  // Index of a channel within the channel list, -1 if absent.
  int channel_index(Channel c) const;
};

// Per-point pixel correspondence plus per-pixel winning point.
struct PixelIndexMap {
  struct Entry {
    int32_t u = -1;
    int32_t v = -1;
    bool projected = false;  // has pixel coordinates
    bool winner = false;     // its values are stored in the image
  };
  int height = 0;
  int width = 0;
  std::vector<Entry> points;
  std::vector<int32_t> winner;  // height * width, -1 where invalid

  int32_t winner_at(int v, int u) const {
    return winner[static_cast<std::size_t>(v) * width + u];
  }
};

// Euclidean range of a point.
double range_of(const LidarPoint& p);

// Continuous pixel coordinates before discretization. Throws InvariantError
// for a zero-range point.
struct ContinuousPixel {
  double u = 0.0;
  double v = 0.0;
};
ContinuousPixel project_point(const LidarPoint& p, const ProjectionSpec& spec);

struct ProjectionResult {
  RangeImage image;
  PixelIndexMap index_map;
};

// Projects a cloud into a range image. Discretization is floor of the
// continuous coordinates clamped to bounds; pixel collisions keep the point
// with the smallest range, ties by lowest input index. Throws InputError on
// an empty cloud.
ProjectionResult build_range_image(const PointCloud& cloud,
                                   const ProjectionSpec& spec);

// One point per valid pixel, read back from the stored coordinate channels.
PointCloud unproject(const RangeImage& img);

}  // namespace rangekit
