#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rangekit/box_geom.hpp"

namespace rangekit {

struct DistanceBucket {
  double near = 0.0;
  double far = 0.0;  // exclusive
};

struct EvalConfig {
  double iou_threshold = 0.7;
  int recall_positions = 40;
  IouMode mode = IouMode::Iou3d;
  std::vector<DistanceBucket> buckets = {{0.0, 30.0}, {30.0, 50.0}, {50.0, 75.0}};
  int level1_min_points = 5;
  int level2_min_points = 1;

  void validate() const;
};

// Ground truth with the metadata the metrics need.
struct EvalGroundTruth {
  Box3D box;
  int interior_points = 0;  // for Waymo difficulty levels
  // KITTI devkit metadata; negative height means missing.
  double bbox_height_px = -1.0;
  int occlusion = -1;
  double truncation = -1.0;
};

// Per-frame match outcome.
struct MatchLedger {
  struct DetRecord {
    double score = 0.0;
    bool true_positive = false;
    int gt_index = -1;
    double heading_error = 0.0;  // |yaw delta| wrapped to [0, pi]
  };
  std::vector<DetRecord> detections;  // in input detection order
  std::vector<uint8_t> gt_matched;
  int frame_index = 0;
};

// Greedy score-descending matching; a detection claims the highest-IoU
// unmatched gt at or above the threshold.
MatchLedger match_frame(const std::vector<Detection>& dets,
                        const std::vector<Box3D>& gts, double iou_thr,
                        IouMode mode);

// Average precision with `recall_positions` interpolated recall samples.
// Detections are sorted globally by (score desc, frame, index). Returns
// nullopt when n_gt is 0.
std::optional<double> ap_r40(const std::vector<MatchLedger>& ledgers,
                             int n_gt, int recall_positions = 40);

// Same sampling, but each true positive contributes
// max(0, 1 - heading_error / pi) to the cumulative true-positive mass.
std::optional<double> aph_r40(const std::vector<MatchLedger>& ledgers,
                              int n_gt, int recall_positions = 40);

enum class WaymoLevel { L1, L2 };

struct BucketSlice {
  int bucket = 0;
  WaymoLevel level = WaymoLevel::L1;
  // Per input frame, the indices retained in this slice.
  std::vector<std::vector<int>> gt_indices;
  std::vector<std::vector<int>> det_indices;
  int n_gt = 0;
};

// Assigns ground truths and detections to distance buckets by center range
// and ground truths to difficulty levels by interior point count.
std::vector<BucketSlice> bucketize(
    const std::vector<std::vector<EvalGroundTruth>>& gts,
    const std::vector<std::vector<Detection>>& dets, const EvalConfig& cfg);

enum class KittiDifficulty { Easy, Moderate, Hard, None };

const char* kitti_difficulty_name(KittiDifficulty d);

// Standard devkit tiering from 2D box height, occlusion code and truncation.
KittiDifficulty kitti_difficulty(const EvalGroundTruth& gt);

}  // namespace rangekit
