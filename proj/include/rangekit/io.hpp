#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rangekit/augment.hpp"
#include "rangekit/metrics.hpp"
#include "rangekit/range_image.hpp"
#include "rangekit/types.hpp"
#include "rangekit/view_transfer.hpp"

namespace rangekit::io {

// ---- KITTI velodyne binary: dense little-endian float32 (x, y, z, i). ----
PointCloud read_velodyne_bin(const std::filesystem::path& path);
void write_velodyne_bin(const std::filesystem::path& path, const PointCloud& cloud);

// ---- Range-image container ------------------------------------------------
// magic "RGRD", u32 version, u32 h, u32 w, u32 C,
// h*w*C float32 row-major, h*w validity bytes.
void write_range_image(const std::filesystem::path& path, const RangeImage& img);
RangeImage read_range_image(const std::filesystem::path& path);

// ---- BEV grid container ---------------------------------------------------
// Same layout with magic "BEVG"; the trailing per-cell section holds
// little-endian u32 counts instead of validity bytes.
void write_bev_grid(const std::filesystem::path& path, const BevGrid& grid);
BevGrid read_bev_grid(const std::filesystem::path& path);

// ---- Pooled RoI features --------------------------------------------------
// RGRD-style header with magic "POOL": u32 version, u32 G, u32 C, then
// G^3*C float32 in (i, j, k, channel) order, k and channel fastest.
void write_pooled_feature(const std::filesystem::path& path,
                          const std::vector<float>& pooled, int grid,
                          int feature_dim);
std::vector<float> read_pooled_feature(const std::filesystem::path& path,
                                       int* grid = nullptr,
                                       int* feature_dim = nullptr);

// ---- Detection text format ------------------------------------------------
// One detection per line: class score cx cy cz length width height yaw
std::string detections_to_text(const std::vector<Detection>& dets);
std::vector<Detection> detections_from_text(const std::string& text,
                                            const std::string& source = "<text>");
void write_detections(const std::filesystem::path& path,
                      const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);

// ---- KITTI labels and calibration ------------------------------------------
struct KittiLabel {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  double bbox[4] = {0, 0, 0, 0};  // left, top, right, bottom
  // Camera-frame geometry as stored in the file.
  double height = 0.0, width = 0.0, length = 0.0;
  double cam_x = 0.0, cam_y = 0.0, cam_z = 0.0;
  double rotation_y = 0.0;
  double score = -1.0;  // detections only
  bool dont_care = false;
};

// Row-major 4x4 homogeneous transform.
struct Transform4 {
  std::array<double, 16> m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  std::array<double, 3> apply(const std::array<double, 3>& p) const;
  Transform4 inverse() const;
  static Transform4 compose(const Transform4& a, const Transform4& b);  // a*b
};

struct KittiCalib {
  Transform4 velo_to_cam;  // rectified: R0_rect * Tr_velo_to_cam
};

std::vector<KittiLabel> read_kitti_labels(const std::filesystem::path& path);
KittiCalib read_kitti_calib(const std::filesystem::path& path);

// Camera-frame label -> sensor-frame box (KITTI boxes sit on the ground, so
// the stored location is the bottom-face center).
Box3D kitti_label_to_sensor_box(const KittiLabel& label, const KittiCalib& calib);
// Inverse conversion for exporting detections.
KittiLabel sensor_box_to_kitti_label(const Box3D& box, const std::string& type,
                                     double score, const KittiCalib& calib);

// ---- Flat key-value configuration: `section.key = value`, '#' comments. ----
using KeyValueConfig = std::map<std::string, std::string>;
KeyValueConfig read_config(const std::filesystem::path& path);
KeyValueConfig parse_config(const std::string& text);
double config_number(const KeyValueConfig& cfg, const std::string& key,
                     double fallback);
std::string config_string(const KeyValueConfig& cfg, const std::string& key,
                          const std::string& fallback);

// ---- Object bank persistence ------------------------------------------------
// A directory holding `index.txt` (class, point count, box params per line)
// and one binary record per object with per-point
// (x, y, z, intensity, elongation) float32 and (u, v) int32, little-endian.
void write_object_bank(const std::filesystem::path& dir, const ObjectBank& bank);
ObjectBank read_object_bank(const std::filesystem::path& dir);

// ---- Visualization --------------------------------------------------------
// ASCII PLY with per-vertex color.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::array<uint8_t, 3>>& colors);

// Binary PPM (P6).
struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height

  PpmImage() = default;
  PpmImage(int w, int h, std::array<uint8_t, 3> fill = {0, 0, 0});
  void set(int x, int y, std::array<uint8_t, 3> c);
};
void write_ppm(const std::filesystem::path& path, const PpmImage& img);

}  // namespace rangekit::io
