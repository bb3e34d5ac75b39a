#pragma once

#include <cmath>
#include <random>

#include "rangekit/augment.hpp"
#include "rangekit/types.hpp"

namespace rangekit::testing {

inline Box3D random_box(std::mt19937_64& rng, double center_span = 20.0) {
  std::uniform_real_distribution<double> center(-center_span, center_span);
  std::uniform_real_distribution<double> dim(1.0, 5.0);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  return Box3D(center(rng), center(rng), 0.2 * center(rng), dim(rng), dim(rng),
               dim(rng), yaw(rng));
}

// Points strictly inside the box, at least `margin` from every face.
inline PointCloud interior_points(std::mt19937_64& rng, const Box3D& box,
                                  int count, double margin = 0.05) {
  std::uniform_real_distribution<double> u(-0.5 + margin, 0.5 - margin);
  std::uniform_real_distribution<float> inten(0.0f, 1.0f);
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  PointCloud points;
  for (int i = 0; i < count; ++i) {
    const double lx = u(rng) * box.length;
    const double ly = u(rng) * box.width;
    const double lz = u(rng) * box.height;
    LidarPoint p;
    p.x = static_cast<float>(box.cx + c * lx - s * ly);
    p.y = static_cast<float>(box.cy + s * lx + c * ly);
    p.z = static_cast<float>(box.cz + lz);
    p.intensity = inten(rng);
    points.push_back(p);
  }
  return points;
}

// A frame with `boxes` disjoint labeled objects plus scattered background.
inline LabeledFrame random_frame(std::mt19937_64& rng, int boxes,
                                 int points_per_box = 40,
                                 int background_points = 200) {
  LabeledFrame frame;
  std::uniform_real_distribution<float> bg(-40.0f, 40.0f);
  std::uniform_real_distribution<float> bgz(-2.0f, 2.0f);
  for (int b = 0; b < boxes; ++b) {
    Box3D box = random_box(rng, 25.0);
    box.cz = std::min(box.cz, 0.5 * box.height - 0.2);  // keep near the ground
    bool overlaps = false;
    for (const auto& other : frame.objects) {
      if (iou_bev(box, other.box) > 0.0) overlaps = true;
    }
    if (overlaps) {
      --b;
      continue;
    }
    const PointCloud members = interior_points(rng, box, points_per_box);
    frame.cloud.insert(frame.cloud.end(), members.begin(), members.end());
    frame.objects.push_back({box, b % 3 == 0 ? "Cyclist" : "Car"});
  }
  for (int i = 0; i < background_points; ++i) {
    LidarPoint p;
    p.x = bg(rng);
    p.y = bg(rng);
    p.z = bgz(rng);
    if (std::abs(p.x) < 1.0f && std::abs(p.y) < 1.0f) p.x += 5.0f;
    bool inside_any = false;
    for (const auto& obj : frame.objects) {
      if (point_in_box(p.x, p.y, p.z, obj.box, 0.2)) inside_any = true;
    }
    if (inside_any) continue;
    p.intensity = 0.3f;
    frame.cloud.push_back(p);
  }
  return frame;
}

}  // namespace rangekit::testing
