#include "rangekit/targets.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rangekit;

namespace {

Box3D car_like(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> center(-20.0, 20.0);
  std::uniform_real_distribution<double> dim(1.0, 5.0);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  return Box3D(center(rng), center(rng), center(rng) * 0.1, dim(rng), dim(rng),
               dim(rng), yaw(rng));
}

}  // namespace

TEST(GenerateAnchors, CountsAndCenters) {
  const BevSpec bev{0.0, 2.0, 0.0, 2.0, 1.0};  // 2x2 cells
  AnchorSpec spec;
  spec.feature_stride = 1;
  spec.z_center = -1.0;
  const auto anchors = generate_anchors(bev, spec);
  ASSERT_EQ(anchors.size(), 8u);  // 4 positions x 2 yaws
  EXPECT_DOUBLE_EQ(anchors[0].cx, 0.5);
  EXPECT_DOUBLE_EQ(anchors[0].cy, 0.5);
  EXPECT_DOUBLE_EQ(anchors[0].cz, -1.0);
  EXPECT_DOUBLE_EQ(anchors.back().cx, 1.5);
  EXPECT_DOUBLE_EQ(anchors.back().cy, 1.5);
}

TEST(GenerateAnchors, StrideScalesCellCenters) {
  const BevSpec bev = BevSpec::kitti();
  AnchorSpec spec;  // defaults: car prior, stride 2, yaws {0, pi/2}
  const auto anchors = generate_anchors(bev, spec);
  EXPECT_EQ(anchors.size(),
            static_cast<std::size_t>(216) * 248 * 2);
  // First anchor sits half a stride cell in.
  EXPECT_NEAR(anchors[0].cx, bev.x_min + 0.5 * 2 * bev.resolution, 1e-12);
  EXPECT_NEAR(anchors[0].cy, bev.y_min + 0.5 * 2 * bev.resolution, 1e-12);
  EXPECT_DOUBLE_EQ(anchors[0].length, 3.9);
  EXPECT_DOUBLE_EQ(anchors[0].width, 1.6);
  EXPECT_DOUBLE_EQ(anchors[0].height, 1.56);
}

TEST(MatchAnchors, IdentityIsPositiveDisjointIsNegative) {
  const Box3D gt(5, 5, 0, 4, 2, 1.5, 0.4);
  const std::vector<Box3D> anchors = {gt, Box3D(50, 50, 0, 4, 2, 1.5, 0.0)};
  const auto labels = match_anchors(anchors, {gt}, 0.6, 0.45);
  EXPECT_EQ(labels[0].label, AnchorLabel::Positive);
  EXPECT_EQ(labels[0].gt_index, 0);
  EXPECT_EQ(labels[1].label, AnchorLabel::Negative);
}

TEST(MatchAnchors, ForceMatchClaimsBestAnchor) {
  // Anchor overlaps the gt but below the positive threshold.
  const Box3D gt(0, 0, 0, 4, 2, 1.5, 0.0);
  const Box3D weak(1.5, 0.8, 0, 4, 2, 1.5, 0.0);
  ASSERT_LT(iou_bev(weak, gt), 0.6);
  ASSERT_GT(iou_bev(weak, gt), 0.0);
  const auto labels = match_anchors({weak}, {gt}, 0.6, 0.45);
  EXPECT_EQ(labels[0].label, AnchorLabel::Positive);
  EXPECT_EQ(labels[0].gt_index, 0);
}

TEST(MatchAnchors, MidBandIsIgnored) {
  const Box3D gt(0, 0, 0, 4, 2, 1.5, 0.0);
  const Box3D near_miss(1.33, 0.0, 0, 4, 2, 1.5, 0.0);
  const double v = iou_bev(near_miss, gt);
  ASSERT_GT(v, 0.45);
  ASSERT_LT(v, 0.6);
  // A second, better anchor takes the force-match.
  const auto labels = match_anchors({near_miss, gt}, {gt}, 0.6, 0.45);
  EXPECT_EQ(labels[0].label, AnchorLabel::Ignore);
  EXPECT_EQ(labels[1].label, AnchorLabel::Positive);
}

TEST(EncodeBox, IdentityGivesZeroResidual) {
  std::mt19937_64 rng(1);
  const Box3D b = car_like(rng);
  const RegressionResidual r = encode_box(b, b);
  EXPECT_DOUBLE_EQ(r.dx, 0.0);
  EXPECT_DOUBLE_EQ(r.dy, 0.0);
  EXPECT_DOUBLE_EQ(r.dz, 0.0);
  EXPECT_DOUBLE_EQ(r.dl, 0.0);
  EXPECT_DOUBLE_EQ(r.dw, 0.0);
  EXPECT_DOUBLE_EQ(r.dh, 0.0);
  EXPECT_DOUBLE_EQ(r.dtheta, 0.0);
}

TEST(EncodeBox, LogRatioAndSine) {
  const Box3D anchor(0, 0, 0, 2, 1, 1, 0);
  Box3D gt = anchor;
  gt.length = anchor.length * std::exp(1.0);
  gt.yaw = kPi / 2;
  const RegressionResidual r = encode_box(gt, anchor);
  EXPECT_NEAR(r.dl, 1.0, 1e-12);
  EXPECT_NEAR(r.dtheta, 1.0, 1e-12);
}

TEST(EncodeBox, CenterNormalizedByDiagonal) {
  const Box3D anchor(0, 0, 0, 3, 4, 2, 0);  // diagonal 5
  Box3D gt = anchor;
  gt.cx = 2.5;
  gt.cz = 1.0;
  const RegressionResidual r = encode_box(gt, anchor);
  EXPECT_NEAR(r.dx, 0.5, 1e-12);
  EXPECT_NEAR(r.dz, 0.5, 1e-12);
}

TEST(EncodeBox, NonPositiveGtDimsThrow) {
  const Box3D anchor(0, 0, 0, 2, 1, 1, 0);
  Box3D bad = anchor;
  bad.height = 0.0;
  EXPECT_THROW(encode_box(bad, anchor), InvariantError);
}

TEST(DecodeBox, ZeroResidualReturnsAnchor) {
  const Box3D anchor(3, -2, 0.5, 3.9, 1.6, 1.56, 0.3);
  const Box3D out = decode_box(RegressionResidual{}, anchor, 1);
  EXPECT_NEAR(out.cx, anchor.cx, 1e-12);
  EXPECT_NEAR(out.cy, anchor.cy, 1e-12);
  EXPECT_NEAR(out.cz, anchor.cz, 1e-12);
  EXPECT_NEAR(out.length, anchor.length, 1e-12);
  EXPECT_NEAR(out.yaw, anchor.yaw, 1e-12);
}

TEST(DecodeBox, UnitSineIsQuarterTurn) {
  const Box3D anchor(0, 0, 0, 2, 1, 1, 0.2);
  RegressionResidual r;
  r.dtheta = 1.0;
  const Box3D out = decode_box(r, anchor, 1);
  EXPECT_NEAR(out.yaw, wrap_to_pi(anchor.yaw + kPi / 2), 1e-12);
}

TEST(DecodeBox, OverflowingSineIsClamped) {
  const Box3D anchor(0, 0, 0, 2, 1, 1, 0.0);
  RegressionResidual r;
  r.dtheta = 1.5;
  const Box3D out = decode_box(r, anchor, 1);
  EXPECT_NEAR(out.yaw, kPi / 2, 1e-12);
}

TEST(EncodeDecode, RoundTripWithinQuarterTurn) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> delta(-kPi / 2 + 1e-3, kPi / 2 - 1e-3);
  for (int iter = 0; iter < 2000; ++iter) {
    const Box3D anchor = car_like(rng);
    Box3D gt = car_like(rng);
    gt.yaw = wrap_to_pi(anchor.yaw + delta(rng));
    const RegressionResidual r = encode_box(gt, anchor);
    const int dir = direction_targets(gt.yaw, anchor.yaw);
    const Box3D back = decode_box(r, anchor, dir);
    EXPECT_NEAR(back.cx, gt.cx, 1e-6);
    EXPECT_NEAR(back.cy, gt.cy, 1e-6);
    EXPECT_NEAR(back.cz, gt.cz, 1e-6);
    EXPECT_NEAR(back.length, gt.length, 1e-6);
    EXPECT_NEAR(back.width, gt.width, 1e-6);
    EXPECT_NEAR(back.height, gt.height, 1e-6);
    EXPECT_NEAR(std::abs(wrap_to_pi(back.yaw - gt.yaw)), 0.0, 1e-6);
  }
}

TEST(DirectionTargets, HalfOpenConvention) {
  EXPECT_EQ(direction_targets(0.3, 0.3), 1);          // delta 0
  EXPECT_EQ(direction_targets(0.0, kPi / 4), 0);      // delta -pi/4
  EXPECT_EQ(direction_targets(kPi, 0.0), 0);          // delta pi, boundary
  EXPECT_EQ(direction_targets(kPi / 2, 0.0), 1);
}

TEST(FocalLoss, ConfidentCorrectGoesToZero) {
  EXPECT_LT(focal_loss(1.0 - 1e-9, 1, 2.0, 0.25), 1e-6);
}

TEST(FocalLoss, HalfProbabilityHandValue) {
  // -alpha (1-p)^gamma log(p) = 0.25 * 0.25 * ln 2
  const double expect = 0.25 * 0.25 * std::log(2.0);
  EXPECT_NEAR(focal_loss(0.5, 1, 2.0, 0.25), expect, 1e-12);
  EXPECT_NEAR(expect, 0.04332, 1e-5);
}

TEST(FocalLoss, DegeneratesToHalfCrossEntropy) {
  for (double p : {0.1, 0.4, 0.9}) {
    EXPECT_NEAR(focal_loss(p, 1, 0.0, 0.5), -0.5 * std::log(p), 1e-12);
    EXPECT_NEAR(focal_loss(p, 0, 0.0, 0.5), -0.5 * std::log(1.0 - p), 1e-12);
  }
}

TEST(FocalLoss, NonNegativeAndMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> up(0.01, 0.99);
  for (int i = 0; i < 500; ++i) {
    const double p = up(rng);
    const double q = std::min(0.995, p + 0.01);
    EXPECT_GE(focal_loss(p, 1, 2.0, 0.25), 0.0);
    EXPECT_GT(focal_loss(p, 1, 2.0, 0.25), focal_loss(q, 1, 2.0, 0.25));
  }
  // Boundary probabilities are clamped, not NaN.
  EXPECT_TRUE(std::isfinite(focal_loss(0.0, 1, 2.0, 0.25)));
  EXPECT_TRUE(std::isfinite(focal_loss(1.0, 0, 2.0, 0.25)));
}

TEST(SmoothL1, KnownValuesAndJunctionSmoothness) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
  // Value and slope continuity at |x| = 1.
  const double eps = 1e-6;
  EXPECT_NEAR(smooth_l1(1.0 - eps), smooth_l1(1.0 + eps), 2e-6);
  const double slope_in = (smooth_l1(1.0 - eps) - smooth_l1(1.0 - 2 * eps)) / eps;
  const double slope_out = (smooth_l1(1.0 + 2 * eps) - smooth_l1(1.0 + eps)) / eps;
  EXPECT_NEAR(slope_in, slope_out, 1e-4);
}

TEST(CornerLoss, ZeroForExactAndPiFlipped) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Box3D b = car_like(rng);
    EXPECT_DOUBLE_EQ(corner_loss(b, b), 0.0);
    Box3D flipped = b;
    flipped.yaw = wrap_to_pi(b.yaw + kPi);
    EXPECT_NEAR(corner_loss(flipped, b), 0.0, 1e-9);
  }
}

TEST(CornerLoss, PureTranslationFeedsDisplacementThroughSmoothL1) {
  const Box3D b(2.0, -3.0, 0.5, 4.0, 2.0, 1.5, 0.3);
  for (double t : {0.25, 0.7, 3.0}) {
    Box3D moved = b;
    moved.cx += t;
    // Every corner moves by exactly t, so the mean is smooth_l1(t).
    EXPECT_NEAR(corner_loss(moved, b), smooth_l1(t), 1e-9);
  }
}

TEST(RcnnConfidenceTarget, RampWithClamps) {
  EXPECT_DOUBLE_EQ(rcnn_confidence_target(0.25), 0.0);
  EXPECT_DOUBLE_EQ(rcnn_confidence_target(0.75), 1.0);
  EXPECT_DOUBLE_EQ(rcnn_confidence_target(0.5), 0.5);
  EXPECT_DOUBLE_EQ(rcnn_confidence_target(0.0), 0.0);
  EXPECT_DOUBLE_EQ(rcnn_confidence_target(1.0), 1.0);
}

TEST(LossComposition, WeightsAndSums) {
  const LossWeights w;
  EXPECT_DOUBLE_EQ(rpn_loss(1.0, 1.0, 1.0, w), 3.2);
  EXPECT_DOUBLE_EQ(rpn_loss(0.0, 0.0, 0.0, w), 0.0);
  EXPECT_DOUBLE_EQ(rpn_loss(0.5, 0.25, 1.0, w), 1.2);
  EXPECT_DOUBLE_EQ(rcnn_loss(0.3, 0.4, 0.1), 0.8);
  EXPECT_DOUBLE_EQ(total_loss(1.2, 0.8), 2.0);
  EXPECT_DOUBLE_EQ(total_loss(0.0, 0.0), 0.0);
}

TEST(LossComposition, LinearInTerms) {
  const LossWeights w;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), k = u(rng);
    EXPECT_NEAR(rpn_loss(k * a, k * b, k * c, w), k * rpn_loss(a, b, c, w), 1e-12);
    EXPECT_NEAR(total_loss(k * a, k * b), k * total_loss(a, b), 1e-12);
  }
}

TEST(SampleProposals, BalancedWhenBothSidesAreRich) {
  std::mt19937_64 rng(7);
  const Box3D gt(0, 0, 0, 4, 2, 1.5, 0.0);
  std::vector<Box3D> proposals;
  for (int i = 0; i < 200; ++i) proposals.push_back(gt);                  // positives
  for (int i = 0; i < 200; ++i) proposals.push_back(Box3D(100 + 10.0 * i, 0, 0, 4, 2, 1.5, 0));
  const ProposalSample sample = sample_proposals(proposals, {gt}, rng);
  ASSERT_EQ(sample.indices.size(), 128u);
  int pos = 0;
  for (uint8_t f : sample.positive) pos += f;
  EXPECT_EQ(pos, 64);
}

TEST(SampleProposals, ScarcePositivesFilledWithNegatives) {
  std::mt19937_64 rng(8);
  const Box3D gt(0, 0, 0, 4, 2, 1.5, 0.0);
  std::vector<Box3D> proposals;
  for (int i = 0; i < 10; ++i) proposals.push_back(gt);
  for (int i = 0; i < 500; ++i) proposals.push_back(Box3D(100 + 10.0 * i, 0, 0, 4, 2, 1.5, 0));
  const ProposalSample sample = sample_proposals(proposals, {gt}, rng);
  ASSERT_EQ(sample.indices.size(), 128u);
  int pos = 0;
  for (uint8_t f : sample.positive) pos += f;
  EXPECT_EQ(pos, 10);
}

TEST(SampleProposals, DeterministicUnderFixedSeed) {
  const Box3D gt(0, 0, 0, 4, 2, 1.5, 0.0);
  std::vector<Box3D> proposals;
  for (int i = 0; i < 300; ++i) {
    Box3D b = gt;
    b.cx += (i % 3) * 0.2;
    b.cy += (i % 7) * 1.1;
    proposals.push_back(b);
  }
  std::mt19937_64 rng_a(99), rng_b(99);
  const ProposalSample a = sample_proposals(proposals, {gt}, rng_a);
  const ProposalSample b = sample_proposals(proposals, {gt}, rng_b);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_EQ(a.positive, b.positive);
}

TEST(SampleProposals, EmptyThrows) {
  std::mt19937_64 rng(9);
  EXPECT_THROW(sample_proposals({}, {}, rng), InputError);
}
