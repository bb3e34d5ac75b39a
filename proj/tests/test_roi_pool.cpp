#include "rangekit/roi_pool.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace rangekit;

namespace {

struct Scene {
  std::vector<std::array<float, 3>> points;
  std::vector<float> features;
};

// Points jittered strictly inside cells so rigid motions cannot move them
// across cell boundaries.
Scene interior_scene(std::mt19937_64& rng, const Box3D& box, int grid, int c,
                     int points_per_cell_axis = 1) {
  std::uniform_real_distribution<double> frac(0.2, 0.8);
  std::uniform_real_distribution<float> feat(-3.0f, 3.0f);
  Scene scene;
  const double cyaw = std::cos(box.yaw);
  const double syaw = std::sin(box.yaw);
  for (int i = 0; i < grid; i += 2) {
    for (int j = 0; j < grid; j += 3) {
      for (int k = 0; k < grid; k += 2) {
        for (int rep = 0; rep < points_per_cell_axis; ++rep) {
          const double lx = ((i + frac(rng)) / grid - 0.5) * box.length;
          const double ly = ((j + frac(rng)) / grid - 0.5) * box.width;
          const double lz = ((k + frac(rng)) / grid - 0.5) * box.height;
          scene.points.push_back(
              {static_cast<float>(box.cx + cyaw * lx - syaw * ly),
               static_cast<float>(box.cy + syaw * lx + cyaw * ly),
               static_cast<float>(box.cz + lz)});
          for (int ch = 0; ch < c; ++ch) scene.features.push_back(feat(rng));
        }
      }
    }
  }
  return scene;
}

Box3D random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> center(-15.0, 15.0);
  std::uniform_real_distribution<double> dim(1.0, 5.0);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  return Box3D(center(rng), center(rng), center(rng) * 0.2, dim(rng), dim(rng),
               dim(rng), yaw(rng));
}

}  // namespace

TEST(CanonicalTransform, CenterMapsToOrigin) {
  const Box3D box(4, -2, 1, 3, 2, 1.5, 0.8);
  const auto local = canonical_transform(
      {static_cast<float>(box.cx), static_cast<float>(box.cy),
       static_cast<float>(box.cz)},
      box);
  EXPECT_NEAR(local[0], 0.0, 1e-6);
  EXPECT_NEAR(local[1], 0.0, 1e-6);
  EXPECT_NEAR(local[2], 0.0, 1e-6);
}

TEST(CanonicalTransform, ZeroYawIsPureTranslation) {
  const Box3D box(1, 2, 3, 4, 2, 1, 0.0);
  const auto local = canonical_transform({2.0f, 4.0f, 5.0f}, box);
  EXPECT_NEAR(local[0], 1.0, 1e-6);
  EXPECT_NEAR(local[1], 2.0, 1e-6);
  EXPECT_NEAR(local[2], 2.0, 1e-6);
}

TEST(CanonicalTransform, FrontCenterLandsAtHalfLengthForAnyYaw) {
  for (double yaw : {0.0, 0.4, -1.2, kPi / 2, 3.0}) {
    const Box3D box(5, 5, 0, 4, 2, 1.5, yaw);
    const std::array<float, 3> front = {
        static_cast<float>(box.cx + std::cos(yaw) * box.length / 2),
        static_cast<float>(box.cy + std::sin(yaw) * box.length / 2),
        static_cast<float>(box.cz)};
    const auto local = canonical_transform(front, box);
    EXPECT_NEAR(local[0], box.length / 2, 1e-5);
    EXPECT_NEAR(local[1], 0.0, 1e-5);
  }
}

TEST(AssignGrid, CenterCellAndCornerCell) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  const auto center = assign_grid({0.0, 0.0, 0.0}, box, 12);
  ASSERT_TRUE(center.has_value());
  EXPECT_EQ(center->i, 6);
  EXPECT_EQ(center->j, 6);
  EXPECT_EQ(center->k, 6);

  const auto corner = assign_grid({-1.0, -1.0, -1.0}, box, 12);
  ASSERT_TRUE(corner.has_value());
  EXPECT_EQ(corner->i, 0);
  EXPECT_EQ(corner->j, 0);
  EXPECT_EQ(corner->k, 0);

  // The +face belongs to the last cell.
  const auto face = assign_grid({1.0, 0.0, 0.0}, box, 12);
  ASSERT_TRUE(face.has_value());
  EXPECT_EQ(face->i, 11);
}

TEST(AssignGrid, MillimeterBeyondFaceIsOutside) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  EXPECT_FALSE(assign_grid({1.001, 0.0, 0.0}, box, 12).has_value());
  EXPECT_FALSE(assign_grid({0.0, -1.001, 0.0}, box, 12).has_value());
}

TEST(RoiMaxPool, SinglePointSingleCell) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  RoiGridSpec spec;
  spec.grid = 4;
  spec.feature_dim = 2;
  const std::vector<std::array<float, 3>> points = {{0.1f, 0.1f, 0.1f}};
  const std::vector<float> features = {5.0f, -1.0f};
  const auto pooled = roi_max_pool(points, features, box, spec);
  ASSERT_EQ(pooled.size(), spec.output_length());
  int nonzero_cells = 0;
  for (std::size_t cell = 0; cell < pooled.size() / 2; ++cell) {
    if (pooled[cell * 2] != 0.0f || pooled[cell * 2 + 1] != 0.0f) {
      ++nonzero_cells;
      EXPECT_EQ(pooled[cell * 2], 5.0f);
      EXPECT_EQ(pooled[cell * 2 + 1], -1.0f);
    }
  }
  EXPECT_EQ(nonzero_cells, 1);
}

TEST(RoiMaxPool, TwoPointsOneCellChannelwiseMax) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  RoiGridSpec spec;
  spec.grid = 1;
  spec.feature_dim = 3;
  const std::vector<std::array<float, 3>> points = {{0.1f, 0, 0}, {-0.1f, 0, 0}};
  const std::vector<float> features = {1.0f, 5.0f, -2.0f, 3.0f, 4.0f, -1.0f};
  const auto pooled = roi_max_pool(points, features, box, spec);
  ASSERT_EQ(pooled.size(), 3u);
  EXPECT_EQ(pooled[0], 3.0f);
  EXPECT_EQ(pooled[1], 5.0f);
  EXPECT_EQ(pooled[2], -1.0f);
}

TEST(RoiMaxPool, DefaultOutputLength) {
  const RoiGridSpec spec;  // 12^3 x 64
  EXPECT_EQ(spec.output_length(), static_cast<std::size_t>(12 * 12 * 12 * 64));
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  const auto pooled = roi_max_pool(std::vector<std::array<float, 3>>{},
                                   std::vector<float>{}, box, spec);
  EXPECT_EQ(pooled.size(), spec.output_length());
  for (float v : pooled) EXPECT_EQ(v, 0.0f);
}

TEST(RoiMaxPool, FlattenOrderIsRowMajorKFastest) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  RoiGridSpec spec;
  spec.grid = 3;
  spec.feature_dim = 1;
  // A point in cell (2, 1, 0): local (0.5, 0.0, -0.9) of a 2-cube.
  const std::vector<std::array<float, 3>> points = {{0.5f, 0.0f, -0.9f}};
  const std::vector<float> features = {9.0f};
  const auto pooled = roi_max_pool(points, features, box, spec);
  const std::size_t flat = (2u * 3 + 1) * 3 + 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    EXPECT_EQ(pooled[i], i == flat ? 9.0f : 0.0f) << i;
  }
}

TEST(RoiMaxPool, PermutationInvariant) {
  std::mt19937_64 rng(31);
  const Box3D box = random_box(rng);
  RoiGridSpec spec;
  spec.grid = 6;
  spec.feature_dim = 16;
  Scene scene = interior_scene(rng, box, spec.grid, spec.feature_dim, 3);
  const auto baseline = roi_max_pool(scene.points, scene.features, box, spec);

  std::vector<std::size_t> perm(scene.points.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Scene shuffled;
  for (std::size_t i : perm) {
    shuffled.points.push_back(scene.points[i]);
    for (int c = 0; c < spec.feature_dim; ++c) {
      shuffled.features.push_back(scene.features[i * spec.feature_dim + c]);
    }
  }
  EXPECT_EQ(roi_max_pool(shuffled.points, shuffled.features, box, spec), baseline);
}

TEST(RoiMaxPool, RigidInvariance) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  RoiGridSpec spec;
  spec.grid = 5;
  spec.feature_dim = 8;
  for (int iter = 0; iter < 50; ++iter) {
    const Box3D box = random_box(rng);
    const Scene scene = interior_scene(rng, box, spec.grid, spec.feature_dim);
    const auto baseline = roi_max_pool(scene.points, scene.features, box, spec);

    const double t = angle(rng);
    const double tx = shift(rng), ty = shift(rng);
    const double c = std::cos(t), s = std::sin(t);
    Scene moved = scene;
    for (auto& p : moved.points) {
      const double x = p[0], y = p[1];
      p[0] = static_cast<float>(c * x - s * y + tx);
      p[1] = static_cast<float>(s * x + c * y + ty);
    }
    const Box3D moved_box(c * box.cx - s * box.cy + tx,
                          s * box.cx + c * box.cy + ty, box.cz, box.length,
                          box.width, box.height, box.yaw + t);
    const auto transformed =
        roi_max_pool(moved.points, moved.features, moved_box, spec);
    ASSERT_EQ(transformed.size(), baseline.size());
    for (std::size_t i = 0; i < baseline.size(); ++i) {
      ASSERT_NEAR(transformed[i], baseline[i], 1e-6) << "iter " << iter;
    }
  }
}

TEST(RoiMaxPool, AddingAPointNeverDecreasesItsCell) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<float> feat(0.0f, 4.0f);  // non-negative
  const Box3D box(0, 0, 0, 3, 2, 1.5, 0.6);
  RoiGridSpec spec;
  spec.grid = 4;
  spec.feature_dim = 6;
  Scene scene = interior_scene(rng, box, spec.grid, spec.feature_dim);
  for (auto& f : scene.features) f = feat(rng);
  const auto before = roi_max_pool(scene.points, scene.features, box, spec);

  scene.points.push_back({static_cast<float>(box.cx), static_cast<float>(box.cy),
                          static_cast<float>(box.cz)});
  for (int c = 0; c < spec.feature_dim; ++c) scene.features.push_back(feat(rng));
  const auto after = roi_max_pool(scene.points, scene.features, box, spec);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_GE(after[i], before[i]);
  }
}

TEST(RoiMaxPool, MarginAdmitsNearbyPoints) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  RoiGridSpec spec;
  spec.grid = 2;
  spec.feature_dim = 1;
  const std::vector<std::array<float, 3>> points = {{1.1f, 0.0f, 0.0f}};
  const std::vector<float> features = {4.0f};
  auto pooled = roi_max_pool(points, features, box, spec);
  EXPECT_TRUE(std::all_of(pooled.begin(), pooled.end(),
                          [](float v) { return v == 0.0f; }));
  spec.margin = 0.2;
  pooled = roi_max_pool(points, features, box, spec);
  EXPECT_EQ(std::count(pooled.begin(), pooled.end(), 4.0f), 1);
}

TEST(RoiMaxPool, MisalignedFeaturesThrow) {
  const Box3D box(0, 0, 0, 2, 2, 2, 0.0);
  RoiGridSpec spec;
  spec.grid = 2;
  spec.feature_dim = 3;
  const std::vector<std::array<float, 3>> points = {{0, 0, 0}};
  const std::vector<float> features = {1.0f, 2.0f};  // one value short
  EXPECT_THROW(roi_max_pool(points, features, box, spec), InvariantError);
}
