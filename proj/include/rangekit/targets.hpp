#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rangekit/box_geom.hpp"
#include "rangekit/view_transfer.hpp"

namespace rangekit {

struct AnchorSpec {
  double length = 3.9;
  double width = 1.6;
  double height = 1.56;
  std::vector<double> yaws = {0.0, kPi / 2.0};
  double z_center = -1.0;
  int feature_stride = 2;  // BEV cells per anchor position

  void validate() const;
};

struct RegressionResidual {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dl = 0.0;
  double dw = 0.0;
  double dh = 0.0;
  double dtheta = 0.0;  // sin of the yaw difference
};

struct LossWeights {
  double alpha = 2.0;        // regression weight in the proposal loss
  double beta = 0.2;         // direction weight in the proposal loss
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
};

// One anchor per (downsampled BEV cell center x yaw), in row-major cell
// order with yaw fastest.
std::vector<Box3D> generate_anchors(const BevSpec& bev, const AnchorSpec& spec);

enum class AnchorLabel : uint8_t { Negative, Positive, Ignore };

struct AnchorAssignment {
  AnchorLabel label = AnchorLabel::Negative;
  int gt_index = -1;  // valid for positives
  double iou = 0.0;
};

// BEV-IoU matching: IoU >= pos_thr is positive, < neg_thr negative, the band
// between is ignored. Every ground truth with nonzero overlap additionally
// claims its best anchor.
std::vector<AnchorAssignment> match_anchors(const std::vector<Box3D>& anchors,
                                            const std::vector<Box3D>& gts,
                                            double pos_thr, double neg_thr);

// Residual encoding relative to an anchor: center offsets normalized by the
// anchor BEV diagonal (height for z), log dimension ratios, sin yaw delta.
RegressionResidual encode_box(const Box3D& gt, const Box3D& anchor);

// Inverse of encode_box; dir_bit selects the half-circle lost by the sine.
// |dtheta| beyond 1 is clamped.
Box3D decode_box(const RegressionResidual& r, const Box3D& anchor, int dir_bit);

// 1 iff the wrapped yaw difference lies in [0, pi).
int direction_targets(double gt_yaw, double anchor_yaw);

double focal_loss(double p, int y, double gamma, double alpha);
double smooth_l1(double x);

// Minimum over the ground truth and its pi-flipped twin of the mean
// smooth-L1 corner distance.
double corner_loss(const Box3D& pred, const Box3D& gt);

// clamp(2*iou - 0.5, 0, 1)
double rcnn_confidence_target(double iou3d);

// cls + alpha * reg + beta * dir
double rpn_loss(double cls_term, double reg_term, double dir_term,
                const LossWeights& w);

double rcnn_loss(double score_term, double reg_term, double corner_term);

double total_loss(double rpn, double rcnn);

struct ProposalSample {
  std::vector<int> indices;       // sampled proposal indices
  std::vector<uint8_t> positive;  // parallel flags
};

// Samples up to `total`/2 positives (3D IoU >= pos_thr against any gt) and
// fills the remainder with negatives, without replacement. Throws InputError
// when no proposals exist.
ProposalSample sample_proposals(const std::vector<Box3D>& proposals,
                                const std::vector<Box3D>& gts,
                                std::mt19937_64& rng, double pos_thr = 0.55,
                                int total = 128);

}  // namespace rangekit
