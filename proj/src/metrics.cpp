#include "rangekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rangekit {

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
    throw InvariantError("EvalConfig: iou_threshold outside (0, 1]");
  if (recall_positions < 1)
    throw InvariantError("EvalConfig: recall_positions must be >= 1");
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (!(buckets[i].far > buckets[i].near))
      throw InvariantError("EvalConfig: empty distance bucket");
    if (i > 0 && buckets[i].near < buckets[i - 1].far)
      throw InvariantError("EvalConfig: overlapping distance buckets");
  }
}

MatchLedger match_frame(const std::vector<Detection>& dets,
                        const std::vector<Box3D>& gts, double iou_thr,
                        IouMode mode) {
  MatchLedger ledger;
  ledger.detections.resize(dets.size());
  ledger.gt_matched.assign(gts.size(), 0);

  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });

  for (int idx : order) {
    auto& rec = ledger.detections[idx];
    rec.score = dets[idx].score;
    double best = -1.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (ledger.gt_matched[g]) continue;
      const double v = iou(dets[idx].box, gts[g], mode);
      if (v >= iou_thr && v > best) {
        best = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      ledger.gt_matched[best_gt] = 1;
      rec.true_positive = true;
      rec.gt_index = best_gt;
      const double d = std::abs(wrap_to_pi(dets[idx].box.yaw - gts[best_gt].yaw));
      rec.heading_error = d;
    }
  }
  return ledger;
}

namespace {

// Globally sorted (score desc, frame, detection index) TP weights; FP
// entries carry weight 0.
struct RankedDet {
  double score;
  int frame;
  int index;
  bool tp;
  double tp_weight;
};

std::vector<RankedDet> ranked(const std::vector<MatchLedger>& ledgers,
                              bool heading_weighted) {
  std::vector<RankedDet> all;
  for (std::size_t f = 0; f < ledgers.size(); ++f) {
    const auto& ledger = ledgers[f];
    for (std::size_t i = 0; i < ledger.detections.size(); ++i) {
      const auto& d = ledger.detections[i];
      double w = 0.0;
      if (d.true_positive) {
        w = heading_weighted ? std::max(0.0, 1.0 - d.heading_error / kPi) : 1.0;
      }
      all.push_back({d.score, static_cast<int>(f), static_cast<int>(i),
                     d.true_positive, w});
    }
  }
  std::sort(all.begin(), all.end(), [](const RankedDet& a, const RankedDet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });
  return all;
}

std::optional<double> average_precision(const std::vector<MatchLedger>& ledgers,
                                        int n_gt, int recall_positions,
                                        bool heading_weighted) {
  if (n_gt <= 0) return std::nullopt;
  const auto all = ranked(ledgers, heading_weighted);

  // Precision/recall after each prefix of the ranked list.
  std::vector<double> precision(all.size()), recall(all.size());
  double tp_mass = 0.0;
  int tp_count = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    tp_mass += all[i].tp_weight;
    tp_count += all[i].tp ? 1 : 0;
    precision[i] = tp_mass / static_cast<double>(i + 1);
    recall[i] = tp_mass / static_cast<double>(n_gt);
  }

  double ap = 0.0;
  for (int k = 1; k <= recall_positions; ++k) {
    const double r = static_cast<double>(k) / recall_positions;
    double best = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (recall[i] >= r - 1e-12) best = std::max(best, precision[i]);
    }
    ap += best;
  }
  return ap / recall_positions;
}

}  // namespace

std::optional<double> ap_r40(const std::vector<MatchLedger>& ledgers, int n_gt,
                             int recall_positions) {
  return average_precision(ledgers, n_gt, recall_positions, false);
}

std::optional<double> aph_r40(const std::vector<MatchLedger>& ledgers, int n_gt,
                              int recall_positions) {
  return average_precision(ledgers, n_gt, recall_positions, true);
}

std::vector<BucketSlice> bucketize(
    const std::vector<std::vector<EvalGroundTruth>>& gts,
    const std::vector<std::vector<Detection>>& dets, const EvalConfig& cfg) {
  cfg.validate();
  if (gts.size() != dets.size())
    throw InvariantError("bucketize: frame counts differ");

  const auto bucket_of = [&](const Box3D& b) -> int {
    const double d = std::sqrt(b.cx * b.cx + b.cy * b.cy + b.cz * b.cz);
    for (std::size_t i = 0; i < cfg.buckets.size(); ++i) {
      if (d >= cfg.buckets[i].near && d < cfg.buckets[i].far)
        return static_cast<int>(i);
    }
    return -1;
  };

  std::vector<BucketSlice> slices;
  for (std::size_t b = 0; b < cfg.buckets.size(); ++b) {
    for (WaymoLevel level : {WaymoLevel::L1, WaymoLevel::L2}) {
      BucketSlice slice;
      slice.bucket = static_cast<int>(b);
      slice.level = level;
      slice.gt_indices.resize(gts.size());
      slice.det_indices.resize(dets.size());
      const int min_points =
          level == WaymoLevel::L1 ? cfg.level1_min_points : cfg.level2_min_points;
      for (std::size_t f = 0; f < gts.size(); ++f) {
        for (std::size_t g = 0; g < gts[f].size(); ++g) {
          if (bucket_of(gts[f][g].box) != static_cast<int>(b)) continue;
          if (gts[f][g].interior_points < min_points) continue;
          slice.gt_indices[f].push_back(static_cast<int>(g));
          ++slice.n_gt;
        }
        for (std::size_t d = 0; d < dets[f].size(); ++d) {
          if (bucket_of(dets[f][d].box) == static_cast<int>(b))
            slice.det_indices[f].push_back(static_cast<int>(d));
        }
      }
      slices.push_back(std::move(slice));
    }
  }
  return slices;
}

const char* kitti_difficulty_name(KittiDifficulty d) {
  switch (d) {
    case KittiDifficulty::Easy: return "easy";
    case KittiDifficulty::Moderate: return "moderate";
    case KittiDifficulty::Hard: return "hard";
    case KittiDifficulty::None: return "none";
  }
  return "?";
}

KittiDifficulty kitti_difficulty(const EvalGroundTruth& gt) {
  if (gt.bbox_height_px < 0.0 || gt.occlusion < 0 || gt.truncation < 0.0)
    return KittiDifficulty::None;
  if (gt.bbox_height_px >= 40.0 && gt.occlusion <= 0 && gt.truncation <= 0.15)
    return KittiDifficulty::Easy;
  if (gt.bbox_height_px >= 25.0 && gt.occlusion <= 1 && gt.truncation <= 0.30)
    return KittiDifficulty::Moderate;
  if (gt.bbox_height_px >= 25.0 && gt.occlusion <= 2 && gt.truncation <= 0.50)
    return KittiDifficulty::Hard;
  return KittiDifficulty::None;
}

}  // namespace rangekit
