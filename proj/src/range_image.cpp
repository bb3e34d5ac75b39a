#include "rangekit/range_image.hpp"

#include <algorithm>
#include <cmath>

#include "rangekit/kernels.hpp"

namespace rangekit {

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Range: return "range";
    case Channel::X: return "x";
    case Channel::Y: return "y";
    case Channel::Z: return "z";
    case Channel::Intensity: return "intensity";
    case Channel::Elongation: return "elongation";
  }
  return "?";
}

void ProjectionSpec::validate() const {
  if (width < 1 || height < 1)
    throw InvariantError("ProjectionSpec: width and height must be >= 1");
  if (!(fov_up + fov_down > 0.0))
    throw InvariantError("ProjectionSpec: vertical field of view must be positive");
  if (!(azimuth_half_fov > 0.0) || azimuth_half_fov > kPi)
    throw InvariantError("ProjectionSpec: azimuth_half_fov must be in (0, pi]");
  if (channels.empty())
    throw InvariantError("ProjectionSpec: channel list empty");
}

ProjectionSpec ProjectionSpec::kitti() {
  ProjectionSpec spec;
  spec.width = 512;
  spec.height = 48;
  spec.fov_up = 3.0 * kPi / 180.0;
  spec.fov_down = 25.0 * kPi / 180.0;
  spec.azimuth_half_fov = kPi / 4.0;
  spec.drop_outside_azimuth = true;
  spec.channels = {Channel::Range, Channel::X, Channel::Y, Channel::Z,
                   Channel::Intensity};
  return spec;
}

ProjectionSpec ProjectionSpec::waymo() {
  ProjectionSpec spec;
  spec.width = 2650;
  spec.height = 64;
  spec.fov_up = 2.4 * kPi / 180.0;
  spec.fov_down = 17.6 * kPi / 180.0;
  spec.azimuth_half_fov = kPi;
  spec.channels = {Channel::Range,     Channel::X, Channel::Y, Channel::Z,
                   Channel::Intensity, Channel::Elongation};
  return spec;
}

int RangeImage::channel_index(Channel c) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == c) return static_cast<int>(i);
  }
  return -1;
}

double range_of(const LidarPoint& p) {
  return std::sqrt(static_cast<double>(p.x) * p.x +
                   static_cast<double>(p.y) * p.y +
                   static_cast<double>(p.z) * p.z);
}

ContinuousPixel project_point(const LidarPoint& p, const ProjectionSpec& spec) {
  const double r = range_of(p);
  if (!(r > 0.0))
    throw InvariantError("project_point: zero-range point has no direction");
  const double azimuth = std::atan2(static_cast<double>(p.y), static_cast<double>(p.x));
  const double elevation = std::asin(static_cast<double>(p.z) / r);
  ContinuousPixel px;
  px.u = 0.5 * (1.0 - azimuth / spec.azimuth_half_fov) * spec.width;
  px.v = (1.0 - (elevation + spec.fov_down) / spec.vertical_fov()) * spec.height;
  return px;
}

namespace {

float channel_value(const LidarPoint& p, float range, Channel c) {
  switch (c) {
    case Channel::Range: return range;
    case Channel::X: return p.x;
    case Channel::Y: return p.y;
    case Channel::Z: return p.z;
    case Channel::Intensity: return p.intensity;
    case Channel::Elongation: return p.elongation;
  }
  return 0.0f;
}

}  // namespace

ProjectionResult build_range_image(const PointCloud& cloud,
                                   const ProjectionSpec& spec) {
  spec.validate();
  if (cloud.empty()) throw InputError("build_range_image: empty point cloud");

  const int h = spec.height;
  const int w = spec.width;
  const std::size_t n = cloud.size();

  ProjectionResult out;
  out.image.data = Tensor3f(h, w, spec.channel_count(), -1.0f);
  out.image.valid.assign(static_cast<std::size_t>(h) * w, 0);
  out.image.channels = spec.channels;
  out.index_map.height = h;
  out.index_map.width = w;
  out.index_map.points.resize(n);
  out.index_map.winner.assign(static_cast<std::size_t>(h) * w, -1);

  // Ranges in bulk; the per-point float range also becomes the range channel.
  std::vector<float> xs(n), ys(n), zs(n), ranges(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = cloud[i].x;
    ys[i] = cloud[i].y;
    zs[i] = cloud[i].z;
  }
  kernels::point_ranges(xs.data(), ys.data(), zs.data(), n, ranges.data());

  const double ele_min = -spec.fov_down;
  const double ele_max = spec.fov_up;

  for (std::size_t i = 0; i < n; ++i) {
    auto& entry = out.index_map.points[i];
    const LidarPoint& p = cloud[i];
    const double r = range_of(p);
    if (!(r > 0.0)) continue;  // degenerate return, never projected

    const double azimuth = std::atan2(static_cast<double>(p.y),
                                      static_cast<double>(p.x));
    if (spec.drop_outside_azimuth &&
        (azimuth < -spec.azimuth_half_fov || azimuth > spec.azimuth_half_fov)) {
      continue;
    }
    const double elevation = std::asin(static_cast<double>(p.z) / r);
    if (spec.drop_outside_vertical_fov &&
        (elevation < ele_min || elevation > ele_max)) {
      continue;
    }

    const ContinuousPixel px = project_point(p, spec);
    int u = static_cast<int>(std::floor(px.u));
    int v = static_cast<int>(std::floor(px.v));
    u = std::clamp(u, 0, w - 1);
    v = std::clamp(v, 0, h - 1);

    entry.u = u;
    entry.v = v;
    entry.projected = true;

    const std::size_t flat = static_cast<std::size_t>(v) * w + u;
    const int32_t incumbent = out.index_map.winner[flat];
    // Nearest return wins; strict less keeps the lowest index on ties.
    if (incumbent < 0 || ranges[i] < ranges[incumbent]) {
      out.index_map.winner[flat] = static_cast<int32_t>(i);
    }
  }

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t flat = static_cast<std::size_t>(v) * w + u;
      const int32_t idx = out.index_map.winner[flat];
      if (idx < 0) continue;
      out.index_map.points[idx].winner = true;
      out.image.valid[flat] = 1;
      float* px = out.image.data.pixel(v, u);
      for (int c = 0; c < spec.channel_count(); ++c) {
        px[c] = channel_value(cloud[idx], ranges[idx], spec.channels[c]);
      }
    }
  }
  return out;
}

PointCloud unproject(const RangeImage& img) {
  const int cx = img.channel_index(Channel::X);
  const int cy = img.channel_index(Channel::Y);
  const int cz = img.channel_index(Channel::Z);
  if (cx < 0 || cy < 0 || cz < 0)
    throw InvariantError("unproject: image lacks coordinate channels");
  const int ci = img.channel_index(Channel::Intensity);
  const int ce = img.channel_index(Channel::Elongation);

  PointCloud cloud;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.is_valid(v, u)) continue;
      const float* px = img.data.pixel(v, u);
      LidarPoint p;
      p.x = px[cx];
      p.y = px[cy];
      p.z = px[cz];
      if (ci >= 0) p.intensity = px[ci];
      if (ce >= 0) p.elongation = px[ce];
      cloud.push_back(p);
    }
  }
  return cloud;
}

}  // namespace rangekit
