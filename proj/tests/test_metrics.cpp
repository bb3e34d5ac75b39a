#include "rangekit/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace rangekit;

namespace {

Detection det(const Box3D& b, double score) { return {b, score, "Car"}; }

Box3D at(double x, double y, double yaw = 0.0) {
  return Box3D(x, y, 0.0, 4.0, 2.0, 1.5, yaw);
}

// Hand-assembled ledger: a list of (score, is_tp, heading_error) per frame.
MatchLedger ledger_of(std::initializer_list<std::tuple<double, bool, double>> rows) {
  MatchLedger ledger;
  int gt = 0;
  for (const auto& [score, tp, heading] : rows) {
    MatchLedger::DetRecord rec;
    rec.score = score;
    rec.true_positive = tp;
    rec.heading_error = heading;
    rec.gt_index = tp ? gt++ : -1;
    ledger.detections.push_back(rec);
  }
  return ledger;
}

// Threshold-enumeration oracle: for every cut of the globally sorted list,
// recompute precision and recall by counting, then interpolate at the recall
// grid. Shares results with ap_r40 only when all scores are distinct.
double ap_threshold_oracle(const std::vector<MatchLedger>& ledgers, int n_gt,
                           int positions, bool heading_weighted) {
  struct Row {
    double score;
    int frame;
    int index;
    double weight;
  };
  std::vector<Row> rows;
  for (std::size_t f = 0; f < ledgers.size(); ++f) {
    for (std::size_t i = 0; i < ledgers[f].detections.size(); ++i) {
      const auto& d = ledgers[f].detections[i];
      double w = 0.0;
      if (d.true_positive)
        w = heading_weighted ? std::max(0.0, 1.0 - d.heading_error / kPi) : 1.0;
      rows.push_back({d.score, static_cast<int>(f), static_cast<int>(i), w});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });

  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  double tp = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    tp += rows[k].weight;
    pr.push_back({tp / n_gt, tp / static_cast<double>(k + 1)});
  }
  double ap = 0.0;
  for (int s = 1; s <= positions; ++s) {
    const double r = static_cast<double>(s) / positions;
    double best = 0.0;
    for (const auto& [recall, precision] : pr) {
      if (recall >= r - 1e-12) best = std::max(best, precision);
    }
    ap += best;
  }
  return ap / positions;
}

}  // namespace

TEST(MatchFrame, PerfectPredictionsAllTruePositive) {
  const std::vector<Box3D> gts = {at(10, 0), at(20, 5, 0.4)};
  const std::vector<Detection> dets = {det(gts[0], 0.9), det(gts[1], 0.8)};
  const MatchLedger ledger = match_frame(dets, gts, 0.7, IouMode::Iou3d);
  EXPECT_TRUE(ledger.detections[0].true_positive);
  EXPECT_TRUE(ledger.detections[1].true_positive);
  EXPECT_EQ(ledger.detections[0].gt_index, 0);
  EXPECT_EQ(ledger.detections[1].gt_index, 1);
}

TEST(MatchFrame, DuplicateDetectionIsOneTpOneFp) {
  const std::vector<Box3D> gts = {at(10, 0)};
  const std::vector<Detection> dets = {det(gts[0], 0.9), det(gts[0], 0.8)};
  const MatchLedger ledger = match_frame(dets, gts, 0.7, IouMode::Iou3d);
  EXPECT_TRUE(ledger.detections[0].true_positive);
  EXPECT_FALSE(ledger.detections[1].true_positive);
}

TEST(MatchFrame, EmptyDetectionsLeaveGtsUnmatched) {
  const std::vector<Box3D> gts = {at(10, 0), at(20, 0)};
  const MatchLedger ledger = match_frame({}, gts, 0.7, IouMode::Iou3d);
  EXPECT_TRUE(ledger.detections.empty());
  EXPECT_EQ(ledger.gt_matched[0], 0);
  EXPECT_EQ(ledger.gt_matched[1], 0);
}

TEST(MatchFrame, ClaimsHighestIouUnmatchedGt) {
  const std::vector<Box3D> gts = {at(10, 0), at(10.5, 0)};
  // The detection overlaps both; it must claim the closer one.
  const std::vector<Detection> dets = {det(at(10.4, 0), 0.9)};
  const MatchLedger ledger = match_frame(dets, gts, 0.3, IouMode::Bev);
  EXPECT_TRUE(ledger.detections[0].true_positive);
  EXPECT_EQ(ledger.detections[0].gt_index, 1);
}

TEST(MatchFrame, HeadingErrorIsWrapped) {
  const std::vector<Box3D> gts = {at(10, 0, 0.0)};
  const std::vector<Detection> dets = {det(at(10, 0, kPi - 0.1), 0.9)};
  const MatchLedger ledger = match_frame(dets, gts, 0.5, IouMode::Bev);
  ASSERT_TRUE(ledger.detections[0].true_positive);
  EXPECT_NEAR(ledger.detections[0].heading_error, kPi - 0.1, 1e-9);
}

TEST(ApR40, PerfectDetectionsScoreOne) {
  const std::vector<MatchLedger> ledgers = {
      ledger_of({{1.0, true, 0.0}, {1.0, true, 0.0}})};
  const auto ap = ap_r40(ledgers, 2);
  ASSERT_TRUE(ap.has_value());
  EXPECT_DOUBLE_EQ(*ap, 1.0);
}

TEST(ApR40, NoDetectionsScoreZero) {
  const std::vector<MatchLedger> ledgers = {MatchLedger{}};
  const auto ap = ap_r40(ledgers, 3);
  ASSERT_TRUE(ap.has_value());
  EXPECT_DOUBLE_EQ(*ap, 0.0);
}

TEST(ApR40, ZeroGtIsNotApplicable) {
  EXPECT_FALSE(ap_r40({MatchLedger{}}, 0).has_value());
}

TEST(ApR40, HandDerivedFiveSixths) {
  // 2 gts; detections ranked TP(0.9), FP(0.8), TP(0.7):
  // recall <= 1/2 interpolates to precision 1, above to 2/3.
  const std::vector<MatchLedger> ledgers = {
      ledger_of({{0.9, true, 0.0}, {0.8, false, 0.0}, {0.7, true, 0.0}})};
  const auto ap = ap_r40(ledgers, 2);
  ASSERT_TRUE(ap.has_value());
  EXPECT_NEAR(*ap, (20.0 * 1.0 + 20.0 * (2.0 / 3.0)) / 40.0, 1e-12);
  EXPECT_NEAR(*ap, 5.0 / 6.0, 1e-12);
}

TEST(ApR40, MatchesThresholdOracleOnRandomInstances) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uscore(0.0, 1.0);
  for (int iter = 0; iter < 300; ++iter) {
    const int n_gt = 1 + static_cast<int>(rng() % 8);
    const int frames = 1 + static_cast<int>(rng() % 3);
    std::vector<MatchLedger> ledgers(frames);
    int remaining_tp = n_gt;
    for (auto& ledger : ledgers) {
      const int dets = static_cast<int>(rng() % 8);
      for (int d = 0; d < dets; ++d) {
        MatchLedger::DetRecord rec;
        rec.score = uscore(rng);
        rec.true_positive = remaining_tp > 0 && (rng() % 2 == 0);
        if (rec.true_positive) --remaining_tp;
        rec.heading_error = uscore(rng) * kPi;
        ledger.detections.push_back(rec);
      }
    }
    const auto ap = ap_r40(ledgers, n_gt);
    ASSERT_TRUE(ap.has_value());
    EXPECT_NEAR(*ap, ap_threshold_oracle(ledgers, n_gt, 40, false), 1e-9);
    const auto aph = aph_r40(ledgers, n_gt);
    EXPECT_NEAR(*aph, ap_threshold_oracle(ledgers, n_gt, 40, true), 1e-9);
    EXPECT_LE(*aph, *ap + 1e-12);
  }
}

TEST(ApR40, AddingTopScoredTpNeverDecreasesAp) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> uscore(0.0, 0.8);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<MatchLedger> ledgers(1);
    const int n_gt = 4;
    int tp_used = 0;
    for (int d = 0; d < 6; ++d) {
      MatchLedger::DetRecord rec;
      rec.score = uscore(rng);
      rec.true_positive = tp_used < 3 && (rng() % 2 == 0);
      tp_used += rec.true_positive ? 1 : 0;
      ledgers[0].detections.push_back(rec);
    }
    const double before = ap_r40(ledgers, n_gt).value();
    MatchLedger::DetRecord top;
    top.score = 0.99;
    top.true_positive = true;
    ledgers[0].detections.push_back(top);
    const double after = ap_r40(ledgers, n_gt).value();
    EXPECT_GE(after + 1e-12, before);
  }
}

TEST(ApR40, FrameOrderIrrelevant) {
  const MatchLedger a = ledger_of({{0.9, true, 0.0}, {0.1, false, 0.0}});
  const MatchLedger b = ledger_of({{0.5, true, 0.2}, {0.4, true, 0.1}});
  const auto forward = ap_r40({a, b}, 4);
  const auto backward = ap_r40({b, a}, 4);
  EXPECT_DOUBLE_EQ(forward.value(), backward.value());
}

TEST(AphR40, ExactHeadingsEqualAp) {
  const std::vector<MatchLedger> ledgers = {
      ledger_of({{0.9, true, 0.0}, {0.8, false, 0.0}, {0.7, true, 0.0}})};
  EXPECT_DOUBLE_EQ(aph_r40(ledgers, 2).value(), ap_r40(ledgers, 2).value());
}

TEST(AphR40, OppositeHeadingsZeroOut) {
  const std::vector<MatchLedger> ledgers = {
      ledger_of({{0.9, true, kPi}, {0.7, true, kPi}})};
  EXPECT_DOUBLE_EQ(aph_r40(ledgers, 2).value(), 0.0);
  EXPECT_DOUBLE_EQ(ap_r40(ledgers, 2).value(), 1.0);
}

TEST(AphR40, QuarterTurnWeightsHalf) {
  const std::vector<MatchLedger> ledgers = {ledger_of({{0.9, true, kPi / 2}})};
  // One gt, one TP of weight 0.5: recall tops out at 0.5 with precision 0.5.
  const double expect = (20.0 * 0.5) / 40.0;
  EXPECT_NEAR(aph_r40(ledgers, 1).value(), expect, 1e-12);
}

TEST(Bucketize, AssignsByCenterDistanceAndPointCount) {
  EvalConfig cfg;
  std::vector<std::vector<EvalGroundTruth>> gts(1);
  gts[0].push_back({at(29.9, 0), 10, -1, -1, -1});   // bucket 0, L1+L2
  gts[0].push_back({at(40.0, 0), 4, -1, -1, -1});    // bucket 1, L2 only
  gts[0].push_back({at(80.0, 0), 50, -1, -1, -1});   // outside all buckets
  std::vector<std::vector<Detection>> dets(1);
  dets[0].push_back(det(at(10, 0), 0.9));   // bucket 0
  dets[0].push_back(det(at(60, 0), 0.8));   // bucket 2

  const auto slices = bucketize(gts, dets, cfg);
  ASSERT_EQ(slices.size(), 6u);  // 3 buckets x 2 levels

  const auto& b0_l1 = slices[0];
  EXPECT_EQ(b0_l1.bucket, 0);
  EXPECT_EQ(b0_l1.level, WaymoLevel::L1);
  EXPECT_EQ(b0_l1.n_gt, 1);
  EXPECT_EQ(b0_l1.det_indices[0], std::vector<int>{0});

  const auto& b1_l1 = slices[2];
  EXPECT_EQ(b1_l1.n_gt, 0);  // the 4-point gt is below the L1 floor
  const auto& b1_l2 = slices[3];
  EXPECT_EQ(b1_l2.n_gt, 1);

  const auto& b2_l1 = slices[4];
  EXPECT_EQ(b2_l1.det_indices[0], std::vector<int>{1});
  EXPECT_EQ(b2_l1.n_gt, 0);  // the 80 m gt is out of range entirely
}

TEST(KittiDifficulty, DevkitTiers) {
  EvalGroundTruth easy{at(10, 0), 10, 50.0, 0, 0.0};
  EvalGroundTruth moderate{at(10, 0), 10, 30.0, 1, 0.2};
  EvalGroundTruth none{at(10, 0), 10, 20.0, 2, 0.6};
  EXPECT_EQ(kitti_difficulty(easy), KittiDifficulty::Easy);
  EXPECT_EQ(kitti_difficulty(moderate), KittiDifficulty::Moderate);
  EXPECT_EQ(kitti_difficulty(none), KittiDifficulty::None);

  EvalGroundTruth hard{at(10, 0), 10, 27.0, 2, 0.45};
  EXPECT_EQ(kitti_difficulty(hard), KittiDifficulty::Hard);

  EvalGroundTruth missing{at(10, 0), 10, -1.0, -1, -1.0};
  EXPECT_EQ(kitti_difficulty(missing), KittiDifficulty::None);
}

TEST(EvalConfig, RejectsBadThresholdsAndBuckets) {
  EvalConfig cfg;
  cfg.iou_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), InvariantError);
  cfg = EvalConfig{};
  cfg.buckets = {{0.0, 30.0}, {20.0, 50.0}};
  EXPECT_THROW(cfg.validate(), InvariantError);
}
