#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "rangekit/backbone_plan.hpp"
#include "rangekit/io.hpp"
#include "rangekit/kernels.hpp"
#include "rangekit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rangekit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInvariant = 3;

struct CommonOpts {
  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir = ".";
  std::string format = "text";
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "Key-value config file");
  cmd->add_option("--seed", opts->seed, "Master random seed");
  cmd->add_option("--out", opts->out_dir, "Output directory");
  cmd->add_option("--format", opts->format, "Report format")
      ->check(CLI::IsMember({"text", "kv"}));
}

PipelineConfig load_pipeline_config(const CommonOpts& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = PipelineConfig::from_key_values(io::read_config(opts.config_path));
  }
  cfg.seed = opts.seed;
  return cfg;
}

fs::path out_file(const CommonOpts& opts, const std::string& name) {
  fs::create_directories(opts.out_dir);
  return fs::path(opts.out_dir) / name;
}

// Manifest lines: `frame_id velodyne.bin [labels.txt calib.txt]`.
std::vector<FrameRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  std::vector<FrameRecord> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id, cloud_path, label_path, calib_path;
    if (!(ls >> id >> cloud_path))
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": expected `frame_id cloud.bin [labels.txt calib.txt]`");
    ls >> label_path >> calib_path;
    FrameRecord frame;
    if (!label_path.empty() && !calib_path.empty()) {
      frame = load_kitti_frame(cloud_path, label_path, calib_path);
      frame.id = id;
    } else {
      frame.id = id;
      frame.cloud = io::read_velodyne_bin(cloud_path);
      if (!label_path.empty()) {
        for (const Detection& d : io::read_detections(label_path)) {
          frame.gts.push_back({d.box, d.label});
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// Deterministic synthetic scene for demos and smoke runs.
std::vector<FrameRecord> synthetic_frames(int count, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(8.0, 48.0);
  std::uniform_real_distribution<double> uy(-18.0, 18.0);
  std::uniform_real_distribution<double> uyaw(-kPi, kPi);
  std::uniform_real_distribution<float> jitter(-0.4f, 0.4f);
  std::vector<FrameRecord> frames;
  for (int f = 0; f < count; ++f) {
    FrameRecord frame;
    frame.id = "synthetic_" + std::to_string(f);
    for (int b = 0; b < 3; ++b) {
      Box3D box(ux(rng), uy(rng), -0.8, 3.9, 1.6, 1.56, uyaw(rng));
      for (int p = 0; p < 120; ++p) {
        LidarPoint pt;
        pt.x = static_cast<float>(box.cx) + jitter(rng);
        pt.y = static_cast<float>(box.cy) + jitter(rng);
        pt.z = static_cast<float>(box.cz) + jitter(rng);
        pt.intensity = 0.5f;
        frame.cloud.push_back(pt);
      }
      frame.gts.push_back({box, "Car"});
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void report_metrics(std::ostream& os, const std::string& format,
                    const PipelineResult& result) {
  if (format == "kv") {
    os << "eval.n_gt = " << result.total_gt << "\n";
    os << "eval.ap_r40 = " << (result.ap ? std::to_string(*result.ap) : "n/a") << "\n";
    os << "eval.aph_r40 = " << (result.aph ? std::to_string(*result.aph) : "n/a") << "\n";
    os << "trace.proposal_cap = " << result.trace.proposal_cap << "\n";
    os << "trace.max_proposals_entering_roi = "
       << result.trace.max_proposals_entering_roi << "\n";
  } else {
    os << "frames evaluated : " << result.detections.size() << "\n";
    os << "ground truths    : " << result.total_gt << "\n";
    os << "AP  (R40)        : " << (result.ap ? std::to_string(*result.ap) : "n/a") << "\n";
    os << "APH (R40)        : " << (result.aph ? std::to_string(*result.aph) : "n/a") << "\n";
  }
}

int cmd_convert(const CommonOpts& opts, const std::string& input,
                const std::string& output) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  const fs::path in_path(input);
  const fs::path out_path = out_file(opts, output);
  if (in_path.extension() == ".bin") {
    const PointCloud cloud = io::read_velodyne_bin(in_path);
    const ProjectionResult proj = build_range_image(cloud, cfg.projection);
    io::write_range_image(out_path, proj.image);
    std::cout << "wrote range image " << out_path.string() << " ("
              << proj.image.height() << "x" << proj.image.width() << "x"
              << proj.image.channel_count() << ")\n";
  } else if (in_path.extension() == ".rgrd") {
    const RangeImage img = io::read_range_image(in_path);
    io::write_velodyne_bin(out_path, unproject(img));
    std::cout << "wrote point cloud " << out_path.string() << "\n";
  } else {
    throw InputError("convert: expected a .bin or .rgrd input");
  }
  return kExitOk;
}

int cmd_project(const CommonOpts& opts, const std::string& input) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  const PointCloud cloud = io::read_velodyne_bin(input);
  const ProjectionResult proj = build_range_image(cloud, cfg.projection);
  const fs::path out_path = out_file(opts, "projection.txt");
  std::ofstream out(out_path);
  if (opts.format == "kv") {
    out << "projection.height = " << proj.image.height() << "\n";
    out << "projection.width = " << proj.image.width() << "\n";
    out << "projection.points = " << cloud.size() << "\n";
  }
  for (std::size_t i = 0; i < proj.index_map.points.size(); ++i) {
    const auto& e = proj.index_map.points[i];
    if (opts.format == "kv") {
      out << "point." << i << " = " << e.u << "," << e.v << ","
          << (e.projected ? (e.winner ? "winner" : "occluded") : "dropped") << "\n";
    } else {
      out << i << " " << e.u << " " << e.v << " "
          << (e.projected ? (e.winner ? "winner" : "occluded") : "dropped") << "\n";
    }
  }
  std::cout << "wrote " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_augment(const CommonOpts& opts, const std::string& input,
                const std::string& labels, const std::string& bank_dir,
                const std::string& make_bank_dir) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  PointCloud cloud = io::read_velodyne_bin(input);
  std::vector<LabeledObject> objects;
  if (!labels.empty()) {
    for (const Detection& d : io::read_detections(labels))
      objects.push_back({d.box, d.label});
  }

  if (!make_bank_dir.empty()) {
    if (objects.empty())
      throw InputError("augment --make-bank needs --labels with at least one box");
    const ObjectBank bank = build_object_bank({{cloud, objects}}, cfg.projection);
    io::write_object_bank(make_bank_dir, bank);
    std::cout << "wrote object bank " << make_bank_dir << " ("
              << bank.entries.size() << " entries, " << bank.skipped_empty
              << " empty skipped)\n";
    return kExitOk;
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<Box3D> boxes;
  for (const auto& o : objects) boxes.push_back(o.box);

  if (std::bernoulli_distribution(cfg.augment.flip_probability)(rng))
    flip_x(cloud, boxes);
  global_rotate(cloud, boxes,
                std::uniform_real_distribution<double>(
                    cfg.augment.rotation_min, cfg.augment.rotation_max)(rng));
  global_scale(cloud, boxes,
               std::uniform_real_distribution<double>(cfg.augment.scale_min,
                                                      cfg.augment.scale_max)(rng));
  for (std::size_t i = 0; i < objects.size(); ++i) objects[i].box = boxes[i];

  // Points first, then the projection; pasting operates on the image.
  ProjectionResult proj = build_range_image(cloud, cfg.projection);
  PasteStats stats{};
  if (!bank_dir.empty()) {
    const ObjectBank bank = io::read_object_bank(bank_dir);
    stats = cut_and_paste(proj.image, objects, bank, rng, cfg.augment);
  }

  const fs::path image_path = out_file(opts, "augmented.rgrd");
  io::write_range_image(image_path, proj.image);
  std::vector<Detection> out_labels;
  for (const auto& o : objects) out_labels.push_back({o.box, 1.0, o.label});
  io::write_detections(out_file(opts, "augmented_labels.txt"), out_labels);
  std::cout << "wrote " << image_path.string() << " (pasted " << stats.pasted
            << " objects, " << stats.pixels_written << " pixels)\n";
  return kExitOk;
}

int cmd_pool(const CommonOpts& opts, const std::string& input,
             const std::vector<double>& box_params) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  if (box_params.size() != 7)
    throw InputError("pool: --box needs cx cy cz length width height yaw");
  const Box3D proposal(box_params[0], box_params[1], box_params[2],
                       box_params[3], box_params[4], box_params[5],
                       box_params[6]);

  const PointCloud cloud = io::read_velodyne_bin(input);
  const ProjectionResult proj = build_range_image(cloud, cfg.projection);
  OracleInjector oracle;
  FrameRecord frame;
  frame.cloud = cloud;
  const Tensor3f fmap = oracle.feature_map(frame, proj.image, cfg.roi.feature_dim);
  const PointFeatureSet pfs = gather_point_features(fmap, proj.index_map, cloud);
  const std::vector<float> pooled = roi_max_pool(pfs, proposal, cfg.roi);

  const fs::path out_path = out_file(opts, "pooled.bin");
  io::write_pooled_feature(out_path, pooled, cfg.roi.grid, cfg.roi.feature_dim);
  std::cout << "wrote " << out_path.string() << " (" << pooled.size()
            << " values)\n";
  return kExitOk;
}

int cmd_eval(const CommonOpts& opts, const std::string& manifest_path) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  // Manifest lines: `frame_id detections.txt groundtruth.txt`.
  std::ifstream in(manifest_path);
  if (!in) throw InputError("cannot open manifest " + manifest_path);
  std::vector<MatchLedger> ledgers;
  int n_gt = 0;
  std::string line;
  int line_no = 0;
  int frame_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id, det_path, gt_path;
    if (!(ls >> id >> det_path >> gt_path))
      throw InputError(manifest_path + ":" + std::to_string(line_no) +
                       ": expected `frame_id dets.txt gts.txt`");
    const std::vector<Detection> dets = io::read_detections(det_path);
    std::vector<Box3D> gts;
    for (const Detection& d : io::read_detections(gt_path)) gts.push_back(d.box);
    n_gt += static_cast<int>(gts.size());
    MatchLedger ledger = match_frame(dets, gts, cfg.eval.iou_threshold, cfg.eval.mode);
    ledger.frame_index = frame_index++;
    ledgers.push_back(std::move(ledger));
  }
  const auto ap = ap_r40(ledgers, n_gt, cfg.eval.recall_positions);
  const auto aph = aph_r40(ledgers, n_gt, cfg.eval.recall_positions);
  if (opts.format == "kv") {
    std::cout << "eval.n_gt = " << n_gt << "\n";
    std::cout << "eval.ap_r40 = " << (ap ? std::to_string(*ap) : "n/a") << "\n";
    std::cout << "eval.aph_r40 = " << (aph ? std::to_string(*aph) : "n/a") << "\n";
  } else {
    std::cout << "ground truths : " << n_gt << "\n";
    std::cout << "AP  (R40)     : " << (ap ? std::to_string(*ap) : "n/a") << "\n";
    std::cout << "APH (R40)     : " << (aph ? std::to_string(*aph) : "n/a") << "\n";
  }
  return kExitOk;
}

int cmd_pipeline(const CommonOpts& opts, const std::string& manifest_path,
                 int synthetic, const std::string& injector_name) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  std::vector<FrameRecord> frames;
  if (!manifest_path.empty()) {
    frames = load_manifest(manifest_path);
  } else if (synthetic > 0) {
    frames = synthetic_frames(synthetic, cfg.seed);
  } else {
    throw InputError("pipeline: provide --frames or --synthetic N");
  }

  const auto injector = make_injector(injector_name, cfg.seed);
  const PipelineResult result = run_pipeline(frames, cfg, *injector);

  std::ofstream manifest_out(out_file(opts, "manifest.txt"));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const fs::path det_path =
        out_file(opts, frames[f].id + "_detections.txt");
    io::write_detections(det_path, result.detections[f]);
    std::vector<Detection> gts;
    for (const auto& gt : frames[f].gts) gts.push_back({gt.box, 1.0, gt.label});
    const fs::path gt_path =
        out_file(opts, frames[f].id + "_groundtruth.txt");
    io::write_detections(gt_path, gts);
    manifest_out << frames[f].id << " " << det_path.string() << " "
                 << gt_path.string() << "\n";
  }
  manifest_out.close();
  {
    std::ofstream plan_out(out_file(opts, "plan.txt"));
    plan_out << plan_to_text(
        build_rangercnn_backbone(cfg.projection.channel_count()));
  }
  std::ofstream metrics_out(out_file(opts, "metrics.txt"));
  report_metrics(metrics_out, opts.format, result);
  report_metrics(std::cout, opts.format, result);
  std::cout << "kernel backend: " << kernels::active_backend() << "\n";
  return kExitOk;
}

int cmd_viz(const CommonOpts& opts, const std::string& input,
            const std::string& dets_path) {
  const PipelineConfig cfg = load_pipeline_config(opts);
  FrameRecord frame;
  frame.id = fs::path(input).stem().string();
  frame.cloud = io::read_velodyne_bin(input);
  std::vector<Detection> dets;
  if (!dets_path.empty()) dets = io::read_detections(dets_path);
  fs::create_directories(opts.out_dir);
  viz_export(frame, dets, cfg.bev, fs::path(opts.out_dir) / frame.id);
  std::cout << "wrote " << (fs::path(opts.out_dir) / frame.id).string()
            << ".ply and _bev.ppm\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LIDAR range-image detection toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;

  std::string convert_in, convert_out = "converted.rgrd";
  auto* convert = app.add_subcommand("convert", "Points <-> range image");
  add_common(convert, &opts);
  convert->add_option("--input", convert_in, "Input .bin or .rgrd")->required();
  convert->add_option("--output", convert_out, "Output file name");

  std::string project_in;
  auto* project = app.add_subcommand("project", "Per-point pixel coordinates");
  add_common(project, &opts);
  project->add_option("--input", project_in, "Input .bin")->required();

  std::string augment_in, augment_labels, augment_bank, augment_make_bank;
  auto* augment = app.add_subcommand("augment", "Augment a frame");
  add_common(augment, &opts);
  augment->add_option("--input", augment_in, "Input .bin")->required();
  augment->add_option("--labels", augment_labels, "Box labels (detection text format)");
  augment->add_option("--bank", augment_bank, "Object bank directory for cut-and-paste");
  augment->add_option("--make-bank", augment_make_bank,
                      "Build an object bank from the frame instead of augmenting");

  std::string pool_in;
  std::vector<double> pool_box;
  auto* pool = app.add_subcommand("pool", "RoI-pool a proposal");
  add_common(pool, &opts);
  pool->add_option("--input", pool_in, "Input .bin")->required();
  pool->add_option("--box", pool_box, "Proposal: cx cy cz l w h yaw")
      ->expected(7)
      ->required();

  std::string eval_manifest;
  auto* eval = app.add_subcommand("eval", "Detection metrics");
  add_common(eval, &opts);
  eval->add_option("--manifest", eval_manifest,
                   "Lines: frame_id dets.txt gts.txt")
      ->required();

  std::string pipe_manifest, pipe_injector = "oracle";
  int pipe_synthetic = 0;
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end detection skeleton");
  add_common(pipeline, &opts);
  pipeline->add_option("--frames", pipe_manifest,
                       "Manifest: frame_id cloud.bin [labels.txt calib.txt]");
  pipeline->add_option("--synthetic", pipe_synthetic, "Generate N synthetic frames");
  pipeline->add_option("--injector", pipe_injector, "oracle, zero, or noise");

  std::string viz_in, viz_dets;
  auto* viz = app.add_subcommand("viz", "Export PLY and BEV raster");
  add_common(viz, &opts);
  viz->add_option("--input", viz_in, "Input .bin")->required();
  viz->add_option("--dets", viz_dets, "Detections to overlay");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;  // --help exits cleanly
  }

  try {
    if (convert->parsed()) return cmd_convert(opts, convert_in, convert_out);
    if (project->parsed()) return cmd_project(opts, project_in);
    if (augment->parsed())
      return cmd_augment(opts, augment_in, augment_labels, augment_bank,
                         augment_make_bank);
    if (pool->parsed()) return cmd_pool(opts, pool_in, pool_box);
    if (eval->parsed()) return cmd_eval(opts, eval_manifest);
    if (pipeline->parsed())
      return cmd_pipeline(opts, pipe_manifest, pipe_synthetic, pipe_injector);
    if (viz->parsed()) return cmd_viz(opts, viz_in, viz_dets);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}
