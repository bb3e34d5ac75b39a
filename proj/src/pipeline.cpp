#include "rangekit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>

#include "rangekit/box_geom.hpp"

namespace rangekit {

void PipelineConfig::validate() const {
  projection.validate();
  bev.validate();
  anchor.validate();
  roi.validate();
  augment.validate();
  eval.validate();
  if (proposal_cap < 1) throw InvariantError("PipelineConfig: proposal_cap must be >= 1");
  if (proposal_nms_iou < 0.0 || proposal_nms_iou > 1.0 || final_nms_iou < 0.0 ||
      final_nms_iou > 1.0)
    throw InvariantError("PipelineConfig: NMS thresholds outside [0, 1]");
}

PipelineConfig PipelineConfig::from_key_values(const io::KeyValueConfig& kv) {
  PipelineConfig cfg;
  const std::string dataset = io::config_string(kv, "pipeline.dataset", "kitti");
  if (dataset == "waymo") {
    cfg.projection = ProjectionSpec::waymo();
    cfg.bev = BevSpec::waymo();
  } else if (dataset != "kitti") {
    throw InputError("pipeline.dataset must be kitti or waymo");
  }

  auto num = [&](const std::string& key, double fallback) {
    return io::config_number(kv, key, fallback);
  };
  cfg.projection.width = static_cast<int>(num("projection.width", cfg.projection.width));
  cfg.projection.height = static_cast<int>(num("projection.height", cfg.projection.height));
  cfg.projection.fov_up = num("projection.fov_up_deg", cfg.projection.fov_up * 180.0 / kPi) * kPi / 180.0;
  cfg.projection.fov_down = num("projection.fov_down_deg", cfg.projection.fov_down * 180.0 / kPi) * kPi / 180.0;
  cfg.bev.x_min = num("bev.x_min", cfg.bev.x_min);
  cfg.bev.x_max = num("bev.x_max", cfg.bev.x_max);
  cfg.bev.y_min = num("bev.y_min", cfg.bev.y_min);
  cfg.bev.y_max = num("bev.y_max", cfg.bev.y_max);
  cfg.bev.resolution = num("bev.resolution", cfg.bev.resolution);
  cfg.anchor.length = num("anchor.length", cfg.anchor.length);
  cfg.anchor.width = num("anchor.width", cfg.anchor.width);
  cfg.anchor.height = num("anchor.height", cfg.anchor.height);
  cfg.anchor.z_center = num("anchor.z_center", cfg.anchor.z_center);
  cfg.anchor.feature_stride = static_cast<int>(num("anchor.feature_stride", cfg.anchor.feature_stride));
  cfg.anchor_pos_iou = num("anchor.pos_iou", cfg.anchor_pos_iou);
  cfg.anchor_neg_iou = num("anchor.neg_iou", cfg.anchor_neg_iou);
  cfg.roi.grid = static_cast<int>(num("roi.grid", cfg.roi.grid));
  cfg.roi.feature_dim = static_cast<int>(num("roi.feature_dim", cfg.roi.feature_dim));
  cfg.roi.margin = num("roi.margin", cfg.roi.margin);
  cfg.rcnn_pos_iou = num("rcnn.pos_iou", cfg.rcnn_pos_iou);
  cfg.loss.alpha = num("loss.alpha", cfg.loss.alpha);
  cfg.loss.beta = num("loss.beta", cfg.loss.beta);
  cfg.loss.focal_gamma = num("loss.focal_gamma", cfg.loss.focal_gamma);
  cfg.loss.focal_alpha = num("loss.focal_alpha", cfg.loss.focal_alpha);
  cfg.augment.flip_probability = num("augment.flip_probability", cfg.augment.flip_probability);
  cfg.augment.rotation_min = num("augment.rotation_min", cfg.augment.rotation_min);
  cfg.augment.rotation_max = num("augment.rotation_max", cfg.augment.rotation_max);
  cfg.augment.scale_min = num("augment.scale_min", cfg.augment.scale_min);
  cfg.augment.scale_max = num("augment.scale_max", cfg.augment.scale_max);
  cfg.augment.paste_attempts_per_class =
      static_cast<int>(num("augment.paste_attempts_per_class", cfg.augment.paste_attempts_per_class));
  cfg.eval.iou_threshold = num("eval.iou_threshold", cfg.eval.iou_threshold);
  cfg.eval.recall_positions = static_cast<int>(num("eval.recall_positions", cfg.eval.recall_positions));
  if (io::config_string(kv, "eval.mode", "3d") == "bev") cfg.eval.mode = IouMode::Bev;
  cfg.proposal_nms_iou = num("pipeline.proposal_nms_iou", cfg.proposal_nms_iou);
  cfg.proposal_cap = static_cast<int>(num("pipeline.proposal_cap", cfg.proposal_cap));
  cfg.final_nms_iou = num("pipeline.final_nms_iou", cfg.final_nms_iou);
  cfg.min_proposal_score = num("pipeline.min_proposal_score", cfg.min_proposal_score);
  cfg.seed = static_cast<uint64_t>(num("pipeline.seed", static_cast<double>(cfg.seed)));
  cfg.workers = static_cast<int>(num("pipeline.workers", cfg.workers));
  cfg.validate();
  return cfg;
}

namespace {

// Deterministic pseudo-feature map derived from the stored pixel channels.
Tensor3f features_from_image(const RangeImage& img, int feature_dim) {
  Tensor3f f(img.height(), img.width(), feature_dim);
  const int src_c = img.channel_count();
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.is_valid(v, u)) continue;
      const float* px = img.data.pixel(v, u);
      float* dst = f.pixel(v, u);
      for (int c = 0; c < feature_dim; ++c) {
        dst[c] = px[c % src_c] + static_cast<float>(c / src_c);
      }
    }
  }
  return f;
}

}  // namespace

Tensor3f OracleInjector::feature_map(const FrameRecord&, const RangeImage& img,
                                     int feature_dim) {
  return features_from_image(img, feature_dim);
}

void OracleInjector::score_anchors(const FrameRecord& frame,
                                   const std::vector<Box3D>& anchors,
                                   std::vector<double>& scores,
                                   std::vector<RegressionResidual>& residuals,
                                   std::vector<int>& dir_bits) {
  scores.assign(anchors.size(), 0.0);
  residuals.assign(anchors.size(), RegressionResidual{});
  dir_bits.assign(anchors.size(), 1);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < frame.gts.size(); ++g) {
      const double v = iou_bev(anchors[a], frame.gts[g].box);
      if (v > best) {
        best = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt < 0) continue;
    scores[a] = best;
    residuals[a] = encode_box(frame.gts[best_gt].box, anchors[a]);
    dir_bits[a] = direction_targets(frame.gts[best_gt].box.yaw, anchors[a].yaw);
  }
}

void OracleInjector::refine(const FrameRecord& frame, const Box3D& proposal,
                            const std::vector<float>&, Box3D* refined,
                            double* confidence) {
  double best = 0.0;
  int best_gt = -1;
  for (std::size_t g = 0; g < frame.gts.size(); ++g) {
    const double v = iou_3d(proposal, frame.gts[g].box);
    if (v > best) {
      best = v;
      best_gt = static_cast<int>(g);
    }
  }
  if (best_gt < 0) {
    *refined = proposal;
    *confidence = 0.0;
    return;
  }
  *refined = frame.gts[best_gt].box;
  *confidence = rcnn_confidence_target(iou_3d(*refined, frame.gts[best_gt].box));
}

Tensor3f ZeroInjector::feature_map(const FrameRecord&, const RangeImage& img,
                                   int feature_dim) {
  return Tensor3f(img.height(), img.width(), feature_dim);
}

void ZeroInjector::score_anchors(const FrameRecord&,
                                 const std::vector<Box3D>& anchors,
                                 std::vector<double>& scores,
                                 std::vector<RegressionResidual>& residuals,
                                 std::vector<int>& dir_bits) {
  scores.assign(anchors.size(), 0.0);
  residuals.assign(anchors.size(), RegressionResidual{});
  dir_bits.assign(anchors.size(), 1);
}

void ZeroInjector::refine(const FrameRecord&, const Box3D& proposal,
                          const std::vector<float>&, Box3D* refined,
                          double* confidence) {
  *refined = proposal;
  *confidence = 0.0;
}

NoiseInjector::NoiseInjector(uint64_t seed, double score_sigma,
                             double center_sigma)
    : seed_(seed), score_sigma_(score_sigma), center_sigma_(center_sigma) {}

Tensor3f NoiseInjector::feature_map(const FrameRecord& frame,
                                    const RangeImage& img, int feature_dim) {
  return oracle_.feature_map(frame, img, feature_dim);
}

void NoiseInjector::score_anchors(const FrameRecord& frame,
                                  const std::vector<Box3D>& anchors,
                                  std::vector<double>& scores,
                                  std::vector<RegressionResidual>& residuals,
                                  std::vector<int>& dir_bits) {
  oracle_.score_anchors(frame, anchors, scores, residuals, dir_bits);
  std::mt19937_64 rng(seed_ ^ std::hash<std::string>{}(frame.id));
  std::normal_distribution<double> jitter(0.0, score_sigma_);
  for (double& s : scores) {
    if (s > 0.0) s = std::clamp(s + jitter(rng), 0.0, 1.0);
  }
}

void NoiseInjector::refine(const FrameRecord& frame, const Box3D& proposal,
                           const std::vector<float>& pooled, Box3D* refined,
                           double* confidence) {
  oracle_.refine(frame, proposal, pooled, refined, confidence);
  if (*confidence > 0.0) {
    std::mt19937_64 rng(seed_ ^ (std::hash<std::string>{}(frame.id) * 31) ^
                        std::hash<double>{}(proposal.cx));
    std::normal_distribution<double> jitter(0.0, center_sigma_);
    refined->cx += jitter(rng);
    refined->cy += jitter(rng);
  }
}

std::unique_ptr<FeatureInjector> make_injector(const std::string& name,
                                               uint64_t seed) {
  if (name == "oracle") return std::make_unique<OracleInjector>();
  if (name == "zero") return std::make_unique<ZeroInjector>();
  if (name == "noise") return std::make_unique<NoiseInjector>(seed);
  throw InputError("unknown injector `" + name + "` (oracle, zero, noise)");
}

namespace {

struct FrameOutput {
  std::vector<Detection> detections;
  FrameTrace trace;
};

FrameOutput process_frame(const FrameRecord& frame, const PipelineConfig& cfg,
                          const std::vector<Box3D>& anchors,
                          FeatureInjector& injector) {
  FrameOutput out;
  out.trace.points = static_cast<int>(frame.cloud.size());

  const ProjectionResult proj = build_range_image(frame.cloud, cfg.projection);
  for (uint8_t v : proj.image.valid) out.trace.valid_pixels += v;

  const Tensor3f fmap =
      injector.feature_map(frame, proj.image, cfg.roi.feature_dim);
  const PointFeatureSet pfs =
      gather_point_features(fmap, proj.index_map, frame.cloud);
  // The BEV grid is where a trained head would run; the injector consumes
  // the ground truth instead, so only its occupancy is recorded.
  const BevGrid bev = scatter_to_bev(pfs, cfg.bev);
  for (uint32_t c : bev.counts) out.trace.bev_occupied_cells += c > 0 ? 1 : 0;

  std::vector<double> scores;
  std::vector<RegressionResidual> residuals;
  std::vector<int> dir_bits;
  injector.score_anchors(frame, anchors, scores, residuals, dir_bits);
  if (scores.size() != anchors.size())
    throw InvariantError("pipeline: injector returned wrong score count");
  out.trace.anchors_scored = static_cast<int>(anchors.size());

  std::vector<Detection> proposals;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (scores[a] <= cfg.min_proposal_score) continue;
    Detection d;
    d.box = decode_box(residuals[a], anchors[a], dir_bits[a]);
    d.score = scores[a];
    proposals.push_back(std::move(d));
  }
  out.trace.proposals_scored = static_cast<int>(proposals.size());

  // Proposal suppression in BEV, then the confidence cap.
  std::vector<int> kept = nms(proposals, cfg.proposal_nms_iou, IouMode::Bev);
  std::sort(kept.begin(), kept.end(), [&](int a, int b) {
    if (proposals[a].score != proposals[b].score)
      return proposals[a].score > proposals[b].score;
    return a < b;
  });
  if (static_cast<int>(kept.size()) > cfg.proposal_cap)
    kept.resize(cfg.proposal_cap);
  out.trace.proposals_after_nms = static_cast<int>(kept.size());

  std::vector<Detection> refined_dets;
  for (int idx : kept) {
    const std::vector<float> pooled =
        roi_max_pool(pfs, proposals[idx].box, cfg.roi);
    Box3D refined;
    double confidence = 0.0;
    injector.refine(frame, proposals[idx].box, pooled, &refined, &confidence);
    if (confidence <= 0.0) continue;
    Detection d;
    d.box = refined;
    d.score = confidence;
    refined_dets.push_back(std::move(d));
  }
  out.trace.refined_detections = static_cast<int>(refined_dets.size());

  for (int idx : nms(refined_dets, cfg.final_nms_iou, IouMode::Iou3d)) {
    out.detections.push_back(refined_dets[idx]);
  }
  out.trace.final_detections = static_cast<int>(out.detections.size());
  return out;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<FrameRecord>& frames,
                            const PipelineConfig& cfg,
                            FeatureInjector& injector) {
  cfg.validate();
  const std::vector<Box3D> anchors = generate_anchors(cfg.bev, cfg.anchor);

  std::vector<FrameOutput> outputs(frames.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;

  int workers = cfg.workers > 0
                    ? cfg.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(frames.size())));

  auto work = [&](int worker) {
    for (std::size_t f = worker; f < frames.size(); f += workers) {
      try {
        outputs[f] = process_frame(frames[f], cfg, anchors, injector);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          try {
            std::throw_with_nested(
                InvariantError("pipeline failed on frame " + frames[f].id));
          } catch (...) {
            failure = std::current_exception();
          }
        }
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  PipelineResult result;
  result.trace.proposal_nms_iou = cfg.proposal_nms_iou;
  result.trace.final_nms_iou = cfg.final_nms_iou;
  result.trace.proposal_cap = cfg.proposal_cap;

  std::vector<MatchLedger> ledgers;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    result.detections.push_back(outputs[f].detections);
    result.trace.frames.push_back(outputs[f].trace);
    result.trace.max_proposals_entering_roi =
        std::max(result.trace.max_proposals_entering_roi,
                 outputs[f].trace.proposals_after_nms);
    std::vector<Box3D> gt_boxes;
    for (const auto& gt : frames[f].gts) gt_boxes.push_back(gt.box);
    result.total_gt += static_cast<int>(gt_boxes.size());
    MatchLedger ledger = match_frame(outputs[f].detections, gt_boxes,
                                     cfg.eval.iou_threshold, cfg.eval.mode);
    ledger.frame_index = static_cast<int>(f);
    ledgers.push_back(std::move(ledger));
  }
  result.ap = ap_r40(ledgers, result.total_gt, cfg.eval.recall_positions);
  result.aph = aph_r40(ledgers, result.total_gt, cfg.eval.recall_positions);
  return result;
}

FrameRecord load_kitti_frame(const std::filesystem::path& velodyne_path,
                             const std::filesystem::path& label_path,
                             const std::filesystem::path& calib_path) {
  FrameRecord frame;
  frame.id = velodyne_path.stem().string();
  frame.cloud = io::read_velodyne_bin(velodyne_path);
  frame.calib = io::read_kitti_calib(calib_path);
  frame.has_calib = true;
  for (const io::KittiLabel& label : io::read_kitti_labels(label_path)) {
    if (label.dont_care) continue;
    LabeledObject obj;
    obj.label = label.type;
    obj.box = io::kitti_label_to_sensor_box(label, frame.calib);
    frame.gts.push_back(std::move(obj));
    frame.meta.push_back(label);
  }
  return frame;
}

namespace {

void draw_box_outline(io::PpmImage& img, const Box3D& box, const BevSpec& bev,
                      std::array<uint8_t, 3> color) {
  const auto corners = corners_bev(box);
  for (int e = 0; e < 4; ++e) {
    const Point2& a = corners[e];
    const Point2& b = corners[(e + 1) % 4];
    const int steps = 256;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const double x = a.x + t * (b.x - a.x);
      const double y = a.y + t * (b.y - a.y);
      const auto cell = bev_pixel_of(x, y, bev);
      if (cell) img.set(cell->j, cell->i, color);
    }
  }
}

}  // namespace

void viz_export(const FrameRecord& frame, const std::vector<Detection>& dets,
                const BevSpec& bev, const std::filesystem::path& prefix) {
  std::vector<std::array<uint8_t, 3>> colors(frame.cloud.size());
  for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
    const float t = std::clamp(frame.cloud[i].intensity, 0.0f, 1.0f);
    colors[i] = {static_cast<uint8_t>(40 + 215 * t),
                 static_cast<uint8_t>(40 + 160 * t), 60};
  }
  io::write_ply(prefix.string() + ".ply", frame.cloud, colors);

  // Raster rows follow the x cells, columns the y cells.
  io::PpmImage raster(bev.y_cells(), bev.x_cells(), {15, 15, 20});
  for (const LidarPoint& p : frame.cloud) {
    const auto cell = bev_pixel_of(p.x, p.y, bev);
    if (cell) raster.set(cell->j, cell->i, {90, 90, 90});
  }
  for (const auto& gt : frame.gts) {
    draw_box_outline(raster, gt.box, bev, {60, 200, 60});
  }
  for (const Detection& d : dets) {
    draw_box_outline(raster, d.box, bev, {230, 70, 70});
  }
  io::write_ppm(prefix.string() + "_bev.ppm", raster);
}

}  // namespace rangekit
