#include "rangekit/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rangekit {

void AnchorSpec::validate() const {
  if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0))
    throw InvariantError("AnchorSpec: dimensions must be positive");
  if (yaws.empty()) throw InvariantError("AnchorSpec: yaw set empty");
  if (feature_stride < 1) throw InvariantError("AnchorSpec: feature_stride must be >= 1");
}

std::vector<Box3D> generate_anchors(const BevSpec& bev, const AnchorSpec& spec) {
  bev.validate();
  spec.validate();
  const int nx = bev.x_cells() / spec.feature_stride;
  const int ny = bev.y_cells() / spec.feature_stride;
  const double step = spec.feature_stride * bev.resolution;

  std::vector<Box3D> anchors;
  anchors.reserve(static_cast<std::size_t>(nx) * ny * spec.yaws.size());
  for (int i = 0; i < nx; ++i) {
    const double cx = bev.x_min + (i + 0.5) * step;
    for (int j = 0; j < ny; ++j) {
      const double cy = bev.y_min + (j + 0.5) * step;
      for (double yaw : spec.yaws) {
        anchors.emplace_back(cx, cy, spec.z_center, spec.length, spec.width,
                             spec.height, yaw);
      }
    }
  }
  return anchors;
}

std::vector<AnchorAssignment> match_anchors(const std::vector<Box3D>& anchors,
                                            const std::vector<Box3D>& gts,
                                            double pos_thr, double neg_thr) {
  if (!(0.0 <= neg_thr && neg_thr <= pos_thr && pos_thr <= 1.0))
    throw InvariantError("match_anchors: need 0 <= neg_thr <= pos_thr <= 1");

  std::vector<AnchorAssignment> out(anchors.size());
  std::vector<int> best_anchor_of_gt(gts.size(), -1);
  std::vector<double> best_iou_of_gt(gts.size(), 0.0);

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou_bev(anchors[a], gts[g]);
      if (v > best) {
        best = v;
        best_gt = static_cast<int>(g);
      }
      if (v > best_iou_of_gt[g]) {
        best_iou_of_gt[g] = v;
        best_anchor_of_gt[g] = static_cast<int>(a);
      }
    }
    out[a].iou = best;
    if (best >= pos_thr) {
      out[a].label = AnchorLabel::Positive;
      out[a].gt_index = best_gt;
    } else if (best < neg_thr) {
      out[a].label = AnchorLabel::Negative;
    } else {
      out[a].label = AnchorLabel::Ignore;
    }
  }

  // Force-match: a gt with any overlap claims its best anchor.
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (best_anchor_of_gt[g] < 0 || best_iou_of_gt[g] <= 0.0) continue;
    AnchorAssignment& a = out[best_anchor_of_gt[g]];
    a.label = AnchorLabel::Positive;
    a.gt_index = static_cast<int>(g);
    a.iou = best_iou_of_gt[g];
  }
  return out;
}

RegressionResidual encode_box(const Box3D& gt, const Box3D& anchor) {
  if (gt.degenerate())
    throw InvariantError("encode_box: ground-truth dimensions must be positive");
  if (anchor.degenerate())
    throw InvariantError("encode_box: anchor dimensions must be positive");
  const double diag = std::sqrt(anchor.length * anchor.length +
                                anchor.width * anchor.width);
  RegressionResidual r;
  r.dx = (gt.cx - anchor.cx) / diag;
  r.dy = (gt.cy - anchor.cy) / diag;
  r.dz = (gt.cz - anchor.cz) / anchor.height;
  r.dl = std::log(gt.length / anchor.length);
  r.dw = std::log(gt.width / anchor.width);
  r.dh = std::log(gt.height / anchor.height);
  r.dtheta = std::sin(gt.yaw - anchor.yaw);
  return r;
}

Box3D decode_box(const RegressionResidual& r, const Box3D& anchor, int dir_bit) {
  if (anchor.degenerate())
    throw InvariantError("decode_box: anchor dimensions must be positive");
  const double diag = std::sqrt(anchor.length * anchor.length +
                                anchor.width * anchor.width);
  const double dtheta = std::clamp(r.dtheta, -1.0, 1.0);
  double delta = std::asin(dtheta);  // in [-pi/2, pi/2]
  if (direction_targets(anchor.yaw + delta, anchor.yaw) != (dir_bit ? 1 : 0)) {
    delta += kPi;  // sine is blind to the opposite half-circle
  }
  return Box3D(anchor.cx + r.dx * diag, anchor.cy + r.dy * diag,
               anchor.cz + r.dz * anchor.height,
               anchor.length * std::exp(r.dl), anchor.width * std::exp(r.dw),
               anchor.height * std::exp(r.dh), anchor.yaw + delta);
}

int direction_targets(double gt_yaw, double anchor_yaw) {
  return wrap_to_two_pi(gt_yaw - anchor_yaw) < kPi ? 1 : 0;
}

double focal_loss(double p, int y, double gamma, double alpha) {
  constexpr double eps = 1e-7;
  p = std::clamp(p, eps, 1.0 - eps);
  const double pt = y == 1 ? p : 1.0 - p;
  const double at = y == 1 ? alpha : 1.0 - alpha;
  return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

double smooth_l1(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double corner_loss(const Box3D& pred, const Box3D& gt) {
  Box3D flipped = gt;
  flipped.yaw = wrap_to_pi(gt.yaw + kPi);
  const auto pc = corners_3d(pred);
  double best = 0.0;
  bool first = true;
  for (const Box3D* candidate : {&gt, static_cast<const Box3D*>(&flipped)}) {
    const auto gc = corners_3d(*candidate);
    double mean = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double dx = pc[i][0] - gc[i][0];
      const double dy = pc[i][1] - gc[i][1];
      const double dz = pc[i][2] - gc[i][2];
      mean += smooth_l1(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    mean /= 8.0;
    if (first || mean < best) best = mean;
    first = false;
  }
  return best;
}

double rcnn_confidence_target(double iou3d) {
  return std::clamp(2.0 * iou3d - 0.5, 0.0, 1.0);
}

double rpn_loss(double cls_term, double reg_term, double dir_term,
                const LossWeights& w) {
  return cls_term + w.alpha * reg_term + w.beta * dir_term;
}

double rcnn_loss(double score_term, double reg_term, double corner_term) {
  return score_term + reg_term + corner_term;
}

double total_loss(double rpn, double rcnn) { return rpn + rcnn; }

ProposalSample sample_proposals(const std::vector<Box3D>& proposals,
                                const std::vector<Box3D>& gts,
                                std::mt19937_64& rng, double pos_thr,
                                int total) {
  if (proposals.empty()) throw InputError("sample_proposals: no proposals");

  std::vector<int> positives, negatives;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = 0.0;
    for (const Box3D& gt : gts) best = std::max(best, iou_3d(proposals[i], gt));
    (best >= pos_thr ? positives : negatives).push_back(static_cast<int>(i));
  }
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);

  const int want_pos = total / 2;
  const int n_pos = std::min<int>(want_pos, static_cast<int>(positives.size()));
  const int n_neg = std::min<int>(total - n_pos, static_cast<int>(negatives.size()));

  ProposalSample sample;
  for (int i = 0; i < n_pos; ++i) {
    sample.indices.push_back(positives[i]);
    sample.positive.push_back(1);
  }
  for (int i = 0; i < n_neg; ++i) {
    sample.indices.push_back(negatives[i]);
    sample.positive.push_back(0);
  }
  return sample;
}

}  // namespace rangekit
