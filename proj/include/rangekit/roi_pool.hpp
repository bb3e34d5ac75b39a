#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rangekit/types.hpp"
#include "rangekit/view_transfer.hpp"

namespace rangekit {

struct RoiGridSpec {
  int grid = 12;         // cells per axis
  int feature_dim = 64;
  double margin = 0.0;   // box expansion when collecting member points

  void validate() const;
  std::size_t output_length() const {
    return static_cast<std::size_t>(grid) * grid * grid * feature_dim;
  }
};

// Proposal-frame coordinates: rotate by -yaw about the center so x runs
// along the box length, y along the width, z along the height.
std::array<double, 3> canonical_transform(const std::array<float, 3>& p,
                                          const Box3D& proposal);

struct GridCell {
  int i = 0;
  int j = 0;
  int k = 0;
};

// Cell of a proposal-frame point, floor-assigned with the +face clamped into
// the last cell; nullopt when the point lies outside the box.
std::optional<GridCell> assign_grid(const std::array<double, 3>& p_local,
                                    const Box3D& proposal, int grid,
                                    double margin = 0.0);

// Channelwise max pooling over the proposal's G^3 grid, flattened row-major
// (i, j, k) with k fastest; empty cells stay zero. Feature rows must align
// with points.
std::vector<float> roi_max_pool(const std::vector<std::array<float, 3>>& points,
                                const std::vector<float>& features,
                                const Box3D& proposal, const RoiGridSpec& spec);

// Convenience overload pooling a gathered point-feature set.
std::vector<float> roi_max_pool(const PointFeatureSet& pts,
                                const Box3D& proposal, const RoiGridSpec& spec);

}  // namespace rangekit
