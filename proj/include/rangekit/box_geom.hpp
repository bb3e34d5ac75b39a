#pragma once

#include <array>
#include <vector>

#include "rangekit/types.hpp"

namespace rangekit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class IouMode { Bev, Iou3d };

// Counter-clockwise corners of the box footprint in the ground plane.
std::array<Point2, 4> corners_bev(const Box3D& b);

// All eight corners; the first four are the bottom face in CCW order.
std::array<std::array<double, 3>, 8> corners_3d(const Box3D& b);

// Area of a convex polygon given in order.
double polygon_area(const std::vector<Point2>& poly);

// Intersection of two convex polygons (Sutherland-Hodgman).
std::vector<Point2> clip_convex(const std::vector<Point2>& subject,
                                const std::vector<Point2>& clip);

// Rotated-rectangle IoU in the ground plane. Degenerate boxes yield 0.
double iou_bev(const Box3D& a, const Box3D& b);

// Volume IoU: BEV intersection area times vertical overlap.
double iou_3d(const Box3D& a, const Box3D& b);

double iou(const Box3D& a, const Box3D& b, IouMode mode);

// Greedy non-maximum suppression. Detections are visited in score-descending
// order (ties by lower index); a detection is kept iff its IoU with every
// kept detection is <= threshold. Returns kept indices sorted ascending.
std::vector<int> nms(const std::vector<Detection>& dets, double iou_threshold,
                     IouMode mode);

}  // namespace rangekit
