#include "rangekit/roi_pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rangekit/kernels.hpp"

namespace rangekit {

void RoiGridSpec::validate() const {
  if (grid < 1) throw InvariantError("RoiGridSpec: grid must be >= 1");
  if (feature_dim < 1) throw InvariantError("RoiGridSpec: feature_dim must be >= 1");
  if (margin < 0.0) throw InvariantError("RoiGridSpec: margin must be non-negative");
}

std::array<double, 3> canonical_transform(const std::array<float, 3>& p,
                                          const Box3D& proposal) {
  const double c = std::cos(-proposal.yaw);
  const double s = std::sin(-proposal.yaw);
  const double dx = static_cast<double>(p[0]) - proposal.cx;
  const double dy = static_cast<double>(p[1]) - proposal.cy;
  const double dz = static_cast<double>(p[2]) - proposal.cz;
  return {c * dx - s * dy, s * dx + c * dy, dz};
}

std::optional<GridCell> assign_grid(const std::array<double, 3>& p_local,
                                    const Box3D& proposal, int grid,
                                    double margin) {
  if (proposal.degenerate())
    throw InvariantError("assign_grid: proposal dimensions must be positive");
  const double dims[3] = {proposal.length, proposal.width, proposal.height};
  GridCell cell;
  int* idx[3] = {&cell.i, &cell.j, &cell.k};
  for (int axis = 0; axis < 3; ++axis) {
    const double half = 0.5 * dims[axis] + margin;
    const double v = p_local[axis];
    if (v < -half || v > half) return std::nullopt;
    const double span = 2.0 * half;
    int g = static_cast<int>(std::floor((v + half) / span * grid));
    *idx[axis] = std::clamp(g, 0, grid - 1);
  }
  return cell;
}

std::vector<float> roi_max_pool(const std::vector<std::array<float, 3>>& points,
                                const std::vector<float>& features,
                                const Box3D& proposal, const RoiGridSpec& spec) {
  spec.validate();
  const int g = spec.grid;
  const int c = spec.feature_dim;
  if (features.size() != points.size() * static_cast<std::size_t>(c))
    throw InvariantError("roi_max_pool: feature rows do not align with points");

  const std::size_t cells = static_cast<std::size_t>(g) * g * g;
  std::vector<float> pooled(cells * c, -std::numeric_limits<float>::infinity());
  std::vector<uint8_t> occupied(cells, 0);

  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto local = canonical_transform(points[p], proposal);
    const auto cell = assign_grid(local, proposal, g, spec.margin);
    if (!cell) continue;
    const std::size_t flat =
        (static_cast<std::size_t>(cell->i) * g + cell->j) * g + cell->k;
    occupied[flat] = 1;
    kernels::channel_max(pooled.data() + flat * c,
                         features.data() + p * c, static_cast<std::size_t>(c));
  }
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!occupied[cell]) {
      std::fill_n(pooled.begin() + cell * c, c, 0.0f);
    }
  }
  return pooled;
}

std::vector<float> roi_max_pool(const PointFeatureSet& pts,
                                const Box3D& proposal, const RoiGridSpec& spec) {
  if (pts.feature_dim != spec.feature_dim)
    throw InvariantError("roi_max_pool: point feature dim differs from spec");
  return roi_max_pool(pts.positions, pts.features, proposal, spec);
}

}  // namespace rangekit
