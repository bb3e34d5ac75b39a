#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "rangekit/augment.hpp"
#include "rangekit/io.hpp"
#include "rangekit/metrics.hpp"
#include "rangekit/range_image.hpp"
#include "rangekit/roi_pool.hpp"
#include "rangekit/targets.hpp"
#include "rangekit/view_transfer.hpp"

namespace rangekit {

struct FrameRecord {
  std::string id;
  PointCloud cloud;
  std::vector<LabeledObject> gts;      // sensor frame
  std::vector<io::KittiLabel> meta;    // aligned with gts when loaded from KITTI
  io::KittiCalib calib;
  bool has_calib = false;
};

struct PipelineConfig {
  ProjectionSpec projection = ProjectionSpec::kitti();
  BevSpec bev = BevSpec::kitti();
  AnchorSpec anchor;
  RoiGridSpec roi;
  LossWeights loss;
  AugmentConfig augment;
  EvalConfig eval;
  double anchor_pos_iou = 0.6;
  double anchor_neg_iou = 0.45;
  double rcnn_pos_iou = 0.55;
  double proposal_nms_iou = 0.7;
  int proposal_cap = 100;
  double final_nms_iou = 0.1;
  double min_proposal_score = 1e-3;
  uint64_t seed = 0;
  int workers = 0;  // 0 picks hardware concurrency

  void validate() const;
  // Overrides defaults with `section.key = value` entries.
  static PipelineConfig from_key_values(const io::KeyValueConfig& kv);
};

// Stand-in for the learned stages: supplies the range-image feature map, the
// proposal head outputs, and the refinement head outputs.
class FeatureInjector {
 public:
  virtual ~FeatureInjector() = default;
  virtual std::string name() const = 0;
  virtual Tensor3f feature_map(const FrameRecord& frame, const RangeImage& img,
                               int feature_dim) = 0;
  virtual void score_anchors(const FrameRecord& frame,
                             const std::vector<Box3D>& anchors,
                             std::vector<double>& scores,
                             std::vector<RegressionResidual>& residuals,
                             std::vector<int>& dir_bits) = 0;
  virtual void refine(const FrameRecord& frame, const Box3D& proposal,
                      const std::vector<float>& pooled, Box3D* refined,
                      double* confidence) = 0;
};

// Derives scores and residuals from the ground truth; the pipeline then has
// to reproduce the labels exactly.
class OracleInjector : public FeatureInjector {
 public:
  std::string name() const override { return "oracle"; }
  Tensor3f feature_map(const FrameRecord&, const RangeImage& img,
                       int feature_dim) override;
  void score_anchors(const FrameRecord& frame, const std::vector<Box3D>& anchors,
                     std::vector<double>& scores,
                     std::vector<RegressionResidual>& residuals,
                     std::vector<int>& dir_bits) override;
  void refine(const FrameRecord& frame, const Box3D& proposal,
              const std::vector<float>& pooled, Box3D* refined,
              double* confidence) override;
};

// Scores everything zero; the pipeline must emit no detections.
class ZeroInjector : public FeatureInjector {
 public:
  std::string name() const override { return "zero"; }
  Tensor3f feature_map(const FrameRecord&, const RangeImage& img,
                       int feature_dim) override;
  void score_anchors(const FrameRecord& frame, const std::vector<Box3D>& anchors,
                     std::vector<double>& scores,
                     std::vector<RegressionResidual>& residuals,
                     std::vector<int>& dir_bits) override;
  void refine(const FrameRecord& frame, const Box3D& proposal,
              const std::vector<float>& pooled, Box3D* refined,
              double* confidence) override;
};

// Oracle outputs perturbed by seeded noise; exercises imperfect-score paths.
class NoiseInjector : public FeatureInjector {
 public:
  explicit NoiseInjector(uint64_t seed, double score_sigma = 0.1,
                         double center_sigma = 0.1);
  std::string name() const override { return "noise"; }
  Tensor3f feature_map(const FrameRecord&, const RangeImage& img,
                       int feature_dim) override;
  void score_anchors(const FrameRecord& frame, const std::vector<Box3D>& anchors,
                     std::vector<double>& scores,
                     std::vector<RegressionResidual>& residuals,
                     std::vector<int>& dir_bits) override;
  void refine(const FrameRecord& frame, const Box3D& proposal,
              const std::vector<float>& pooled, Box3D* refined,
              double* confidence) override;

 private:
  OracleInjector oracle_;
  uint64_t seed_;
  double score_sigma_;
  double center_sigma_;
};

std::unique_ptr<FeatureInjector> make_injector(const std::string& name,
                                               uint64_t seed);

struct FrameTrace {
  int points = 0;
  int valid_pixels = 0;
  int bev_occupied_cells = 0;
  int anchors_scored = 0;
  int proposals_scored = 0;        // above the minimum score
  int proposals_after_nms = 0;     // entering RoI pooling, <= proposal_cap
  int refined_detections = 0;
  int final_detections = 0;
};

struct PipelineTrace {
  std::vector<FrameTrace> frames;
  double proposal_nms_iou = 0.0;
  double final_nms_iou = 0.0;
  int proposal_cap = 0;
  int max_proposals_entering_roi = 0;
};

struct PipelineResult {
  std::vector<std::vector<Detection>> detections;  // per frame
  std::optional<double> ap;
  std::optional<double> aph;
  int total_gt = 0;
  PipelineTrace trace;
};

// Deterministic detection skeleton: project, inject features, gather,
// scatter, score anchors, decode, proposal NMS with cap, RoI pool, refine,
// final NMS, evaluate. Frames run in parallel; aggregation is in frame order.
PipelineResult run_pipeline(const std::vector<FrameRecord>& frames,
                            const PipelineConfig& cfg,
                            FeatureInjector& injector);

// Velodyne binary + label file + calibration -> sensor-frame record.
FrameRecord load_kitti_frame(const std::filesystem::path& velodyne_path,
                             const std::filesystem::path& label_path,
                             const std::filesystem::path& calib_path);

// Writes <prefix>.ply (cloud colored by intensity) and <prefix>_bev.ppm
// (occupancy raster with box outlines).
void viz_export(const FrameRecord& frame, const std::vector<Detection>& dets,
                const BevSpec& bev, const std::filesystem::path& prefix);

}  // namespace rangekit
