#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rangekit/range_image.hpp"
#include "rangekit/types.hpp"

namespace rangekit {

// Pointwise features gathered from a range-image feature map, one row per
// projected point, tagged with the source point index so downstream
// accumulation can stay order-independent.
struct PointFeatureSet {
  int feature_dim = 0;
  std::vector<float> features;        // row-major, n x feature_dim
  std::vector<std::array<float, 3>> positions;
  std::vector<int32_t> source_index;

  std::size_t size() const { return positions.size(); }
  float* row(std::size_t i) { return features.data() + i * feature_dim; }
  const float* row(std::size_t i) const {
    return features.data() + i * feature_dim;
  }
};

struct BevSpec {
  double x_min = 0.0;
  double x_max = 69.12;
  double y_min = -39.68;
  double y_max = 39.68;
  double resolution = 0.16;  // meters per cell

  void validate() const;
  int x_cells() const;
  int y_cells() const;

  static BevSpec kitti();
  static BevSpec waymo();
};

// Cell features indexed (x-index, y-index, channel) with per-cell counts.
struct BevGrid {
  Tensor3f features;             // (x_cells, y_cells, C)
  std::vector<uint32_t> counts;  // x_cells * y_cells
  int dropped_out_of_range = 0;

  uint32_t count_at(int i, int j) const {
    return counts[static_cast<std::size_t>(i) * features.width() + j];
  }
};

// Per-point feature lookup: row i is feature_map[v_i, u_i]. Points without
// pixel coordinates are skipped; collision losers still gather the feature of
// their pixel. Throws InvariantError if the map and image sizes disagree.
PointFeatureSet gather_point_features(const Tensor3f& feature_map,
                                      const PixelIndexMap& index_map,
                                      const PointCloud& cloud);

struct BevCell {
  int i = 0;
  int j = 0;
};

// Cell of a ground-plane position; nullopt when outside the grid.
std::optional<BevCell> bev_pixel_of(double x, double y, const BevSpec& spec);

// Average-pools point features into their BEV cells. Contributions are
// ordered by source point index before accumulation, so permuting the input
// rows leaves the output bit-identical.
BevGrid scatter_to_bev(const PointFeatureSet& pts, const BevSpec& spec);

}  // namespace rangekit
