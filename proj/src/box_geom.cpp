#include "rangekit/box_geom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rangekit {

namespace {
constexpr double kAreaEps = 1e-9;  // square meters
}

std::array<Point2, 4> corners_bev(const Box3D& b) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.length;
  const double hw = 0.5 * b.width;
  // Local corners in CCW order, starting at the front-left.
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  std::array<Point2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i].x = b.cx + c * lx[i] - s * ly[i];
    out[i].y = b.cy + s * lx[i] + c * ly[i];
  }
  return out;
}

std::array<std::array<double, 3>, 8> corners_3d(const Box3D& b) {
  const auto bev = corners_bev(b);
  std::array<std::array<double, 3>, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {bev[i].x, bev[i].y, b.cz - 0.5 * b.height};
    out[i + 4] = {bev[i].x, bev[i].y, b.cz + 0.5 * b.height};
  }
  return out;
}

double polygon_area(const std::vector<Point2>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(twice);
}

std::vector<Point2> clip_convex(const std::vector<Point2>& subject,
                                const std::vector<Point2>& clip) {
  std::vector<Point2> output = subject;
  const std::size_t m = clip.size();
  for (std::size_t i = 0; i < m && !output.empty(); ++i) {
    const Point2& a = clip[i];
    const Point2& b = clip[(i + 1) % m];
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    auto inside = [&](const Point2& p) {
      // Left of (or on) the directed edge a->b for a CCW clip polygon.
      return ex * (p.y - a.y) - ey * (p.x - a.x) >= 0.0;
    };
    std::vector<Point2> input;
    input.swap(output);
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Point2& cur = input[j];
      const Point2& prev = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in != prev_in) {
        // Edge crosses the clip line; add the intersection point.
        const double dcur = ex * (cur.y - a.y) - ey * (cur.x - a.x);
        const double dprev = ex * (prev.y - a.y) - ey * (prev.x - a.x);
        const double t = dprev / (dprev - dcur);
        output.push_back({prev.x + t * (cur.x - prev.x),
                          prev.y + t * (cur.y - prev.y)});
      }
      if (cur_in) output.push_back(cur);
    }
  }
  return output;
}

namespace {

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = corners_bev(a);
  const auto cb = corners_bev(b);
  const std::vector<Point2> pa(ca.begin(), ca.end());
  const std::vector<Point2> pb(cb.begin(), cb.end());
  return polygon_area(clip_convex(pa, pb));
}

}  // namespace

double iou_bev(const Box3D& a, const Box3D& b) {
  const double area_a = a.bev_area();
  const double area_b = b.bev_area();
  if (area_a <= kAreaEps || area_b <= kAreaEps) return 0.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  if (uni <= kAreaEps) return 0.0;
  return inter / uni;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (a.degenerate() || b.degenerate()) return 0.0;
  if (a.bev_area() <= kAreaEps || b.bev_area() <= kAreaEps) return 0.0;
  const double inter_area = bev_intersection_area(a, b);
  const double z_lo = std::max(a.cz - 0.5 * a.height, b.cz - 0.5 * b.height);
  const double z_hi = std::min(a.cz + 0.5 * a.height, b.cz + 0.5 * b.height);
  const double overlap = std::max(0.0, z_hi - z_lo);
  const double inter_vol = inter_area * overlap;
  const double uni = a.volume() + b.volume() - inter_vol;
  if (uni <= kAreaEps) return 0.0;
  return inter_vol / uni;
}

double iou(const Box3D& a, const Box3D& b, IouMode mode) {
  return mode == IouMode::Bev ? iou_bev(a, b) : iou_3d(a, b);
}

std::vector<int> nms(const std::vector<Detection>& dets, double iou_threshold,
                     IouMode mode) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });

  std::vector<int> kept;
  for (int idx : order) {
    bool suppressed = false;
    for (int k : kept) {
      if (iou(dets[idx].box, dets[k].box, mode) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace rangekit
