#pragma once

#include <random>
#include <string>
#include <vector>

#include "rangekit/box_geom.hpp"
#include "rangekit/range_image.hpp"
#include "rangekit/types.hpp"

namespace rangekit {

struct LabeledObject {
  Box3D box;
  std::string label = "Car";
};

struct LabeledFrame {
  PointCloud cloud;
  std::vector<LabeledObject> objects;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  double rotation_min = -kPi / 4.0;
  double rotation_max = kPi / 4.0;
  double scale_min = 0.95;
  double scale_max = 1.05;
  int paste_attempts_per_class = 10;

  void validate() const;
};

// True when the point lies inside the oriented box, faces expanded by tol.
bool point_in_box(double x, double y, double z, const Box3D& box,
                  double tol = 0.0);

// Mirror across the x-z plane: y -> -y, box cy -> -cy, yaw -> -yaw.
void flip_x(PointCloud& cloud, std::vector<Box3D>& boxes);

// Rotate the scene about +z by theta.
void global_rotate(PointCloud& cloud, std::vector<Box3D>& boxes, double theta);

// Uniform scaling of coordinates, centers, and dimensions; yaw unchanged.
void global_scale(PointCloud& cloud, std::vector<Box3D>& boxes, double s);

// Stored points of one annotated object together with their range-image
// pixel coordinates from the source frame.
struct ObjectBankEntry {
  struct BankPoint {
    float x = 0, y = 0, z = 0;
    float intensity = 0;
    float elongation = 0;
    int32_t u = 0;
    int32_t v = 0;
  };
  std::string label;
  Box3D box;
  std::vector<BankPoint> points;
};

struct ObjectBank {
  std::vector<ObjectBankEntry> entries;
  int skipped_empty = 0;  // annotated objects with no interior points
};

// Crops every annotated object out of its frame, keeping per-point pixel
// coordinates. Objects with zero interior projected points are skipped and
// counted.
ObjectBank build_object_bank(const std::vector<LabeledFrame>& frames,
                             const ProjectionSpec& spec);

struct PasteStats {
  int attempted = 0;
  int rejected_overlap = 0;
  int pasted = 0;
  int pixels_written = 0;
};

// Pastes sampled bank objects into the image at their stored pixel
// coordinates. A candidate overlapping any current box in BEV is rejected;
// accepted points are written only where they are nearer than the existing
// return (occlusion). The pasted box is appended when at least one pixel
// landed.
PasteStats cut_and_paste(RangeImage& img, std::vector<LabeledObject>& objects,
                         const ObjectBank& bank, std::mt19937_64& rng,
                         const AugmentConfig& cfg);

// Full-ring range-image flip: mirrors columns and negates the y channel,
// equivalent to flip_x followed by reprojection for a 360-degree image.
void mirror_columns(RangeImage& img, std::vector<Box3D>& boxes);

// Full-ring range-image rotation: circular column shift by the nearest whole
// column count, with the exact angle applied to the coordinate channels.
void rotate_columns(RangeImage& img, std::vector<Box3D>& boxes, double theta);

}  // namespace rangekit
