#include "rangekit/view_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rangekit/kernels.hpp"

namespace rangekit {

void BevSpec::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min))
    throw InvariantError("BevSpec: empty extent");
  if (!(resolution > 0.0)) throw InvariantError("BevSpec: resolution must be positive");
}

int BevSpec::x_cells() const {
  return static_cast<int>(std::lround((x_max - x_min) / resolution));
}

int BevSpec::y_cells() const {
  return static_cast<int>(std::lround((y_max - y_min) / resolution));
}

BevSpec BevSpec::kitti() { return BevSpec{0.0, 69.12, -39.68, 39.68, 0.16}; }

BevSpec BevSpec::waymo() {
  return BevSpec{-75.52, 75.52, -75.52, 75.52, 0.32};
}

PointFeatureSet gather_point_features(const Tensor3f& feature_map,
                                      const PixelIndexMap& index_map,
                                      const PointCloud& cloud) {
  if (feature_map.height() != index_map.height ||
      feature_map.width() != index_map.width)
    throw InvariantError("gather_point_features: feature map size differs from index map");
  if (cloud.size() != index_map.points.size())
    throw InvariantError("gather_point_features: cloud size differs from index map");

  PointFeatureSet out;
  out.feature_dim = feature_map.channels();
  std::size_t kept = 0;
  for (const auto& e : index_map.points) kept += e.projected ? 1 : 0;
  out.features.reserve(kept * out.feature_dim);
  out.positions.reserve(kept);
  out.source_index.reserve(kept);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& e = index_map.points[i];
    if (!e.projected) continue;
    if (e.u < 0 || e.u >= feature_map.width() || e.v < 0 ||
        e.v >= feature_map.height())
      throw InvariantError("gather_point_features: pixel index out of bounds");
    const float* px = feature_map.pixel(e.v, e.u);
    out.features.insert(out.features.end(), px, px + out.feature_dim);
    out.positions.push_back({cloud[i].x, cloud[i].y, cloud[i].z});
    out.source_index.push_back(static_cast<int32_t>(i));
  }
  return out;
}

std::optional<BevCell> bev_pixel_of(double x, double y, const BevSpec& spec) {
  spec.validate();
  const int i = static_cast<int>(std::floor((x - spec.x_min) / spec.resolution));
  const int j = static_cast<int>(std::floor((y - spec.y_min) / spec.resolution));
  if (i < 0 || i >= spec.x_cells() || j < 0 || j >= spec.y_cells())
    return std::nullopt;
  return BevCell{i, j};
}

BevGrid scatter_to_bev(const PointFeatureSet& pts, const BevSpec& spec) {
  spec.validate();
  const int nx = spec.x_cells();
  const int ny = spec.y_cells();
  const int c = pts.feature_dim;

  BevGrid grid;
  grid.features = Tensor3f(nx, ny, c);
  grid.counts.assign(static_cast<std::size_t>(nx) * ny, 0);

  // (cell, source index, row) triples sorted so each cell accumulates its
  // contributions in source order regardless of input permutation.
  struct Contribution {
    std::size_t cell;
    int32_t source;
    std::size_t row;
  };
  std::vector<Contribution> contributions;
  contributions.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto cell = bev_pixel_of(pts.positions[i][0], pts.positions[i][1], spec);
    if (!cell) {
      ++grid.dropped_out_of_range;
      continue;
    }
    contributions.push_back(
        {static_cast<std::size_t>(cell->i) * ny + cell->j,
         pts.source_index.empty() ? static_cast<int32_t>(i) : pts.source_index[i],
         i});
  }
  std::sort(contributions.begin(), contributions.end(),
            [](const Contribution& a, const Contribution& b) {
              if (a.cell != b.cell) return a.cell < b.cell;
              return a.source < b.source;
            });

  std::vector<float> comp(static_cast<std::size_t>(nx) * ny * c, 0.0f);
  for (const auto& ct : contributions) {
    float* sum = grid.features.data() + ct.cell * c;
    kernels::kahan_add(sum, comp.data() + ct.cell * c, pts.row(ct.row), c);
    ++grid.counts[ct.cell];
  }
  for (std::size_t cell = 0; cell < grid.counts.size(); ++cell) {
    if (grid.counts[cell] > 1) {
      kernels::scale(grid.features.data() + cell * c, c,
                     1.0f / static_cast<float>(grid.counts[cell]));
    }
  }
  return grid;
}

}  // namespace rangekit
