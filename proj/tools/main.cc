// sparseview: command-line front end for the sparse-view reconstruction
// geometry toolkit. Every subcommand reads/writes stable file formats (PNG,
// PFM, JSON, whitespace text) so stages can be chained or run standalone.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sv/correspondence.h"
#include "sv/depth_align.h"
#include "sv/depth_solver.h"
#include "sv/error.h"
#include "sv/geometry.h"
#include "sv/image.h"
#include "sv/io.h"
#include "sv/metrics.h"
#include "sv/occlusion.h"
#include "sv/parallel.h"
#include "sv/synth_scene.h"
#include "sv/view_synth.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Shared helpers

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) sv::fail("IoError", "cannot create directory " + dir.string());
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) sv::fail("IoError", "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) sv::fail("MissingInput", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    sv::fail("ParseError", path.string() + ": " + e.what());
  }
}

json pose_to_json(const sv::CameraPose& pose) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rotation.push_back(pose.rotation(r, c));
  }
  json translation = json::array();
  for (int r = 0; r < 3; ++r) translation.push_back(pose.translation(r));
  return json{{"rotation", rotation}, {"translation", translation}};
}

sv::CameraPose pose_from_json(const json& j) {
  if (!j.contains("rotation") || !j.contains("translation") ||
      j["rotation"].size() != 9 || j["translation"].size() != 3) {
    sv::fail("ParseError", "pose needs rotation[9] and translation[3]");
  }
  sv::CameraPose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      pose.rotation(r, c) = j["rotation"][static_cast<size_t>(3 * r + c)];
    }
    pose.translation(r) = j["translation"][static_cast<size_t>(r)];
  }
  return pose;
}

json intrinsics_to_json(const sv::CameraIntrinsics& intr) {
  return json{{"fx", intr.fx}, {"fy", intr.fy},         {"cx", intr.cx},
              {"cy", intr.cy}, {"width", intr.width},   {"height", intr.height}};
}

sv::CameraIntrinsics intrinsics_from_json(const json& j) {
  sv::CameraIntrinsics intr;
  intr.fx = j.at("fx");
  intr.fy = j.at("fy");
  intr.cx = j.at("cx");
  intr.cy = j.at("cy");
  intr.width = j.at("width");
  intr.height = j.at("height");
  return intr;
}

uint64_t pair_seed(uint64_t seed, int i, int j) {
  return seed * 1000003ULL + static_cast<uint64_t>(i) * 8191ULL +
         static_cast<uint64_t>(j) + 1ULL;
}

void apply_threads(int threads) {
  if (threads < 0) sv::fail("ConfigOutOfRange", "--threads must be >= 0");
  sv::set_max_threads(threads > 0
                          ? threads
                          : static_cast<int>(std::thread::hardware_concurrency()));
}

int64_t elapsed_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - start)
      .count();
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  std::string preset;
  std::string out;
  uint64_t seed = 0;
  int threads = 0;
  int match_count = 800;
  double match_sigma = 0.0;
  double outlier_fraction = 0.0;
};

// Renders every view and samples labeled matches for every overlapping pair.
// Returns the scene for callers (pipeline) that keep using it.
sv::SyntheticScene run_synth(const SynthOpts& opts) {
  if (opts.match_count < 0) {
    sv::fail("ConfigOutOfRange", "--match-count must be >= 0");
  }
  if (opts.outlier_fraction < 0.0 || opts.outlier_fraction > 1.0) {
    sv::fail("ConfigOutOfRange", "--outlier-fraction must lie in [0, 1]");
  }
  if (opts.match_sigma < 0.0) {
    sv::fail("ConfigOutOfRange", "--match-sigma must be >= 0");
  }
  const sv::SyntheticScene scene = sv::make_preset(opts.preset, opts.seed);
  const fs::path out(opts.out);
  ensure_dir(out);
  ensure_dir(out / "matches");
  ensure_dir(out / "labels");

  sv::write_rig((out / "rig.json").string(), scene.rig);
  for (const sv::CameraView& view : scene.rig.views) {
    const std::string id = std::to_string(view.view_id);
    sv::write_png_rgb((out / ("view_" + id + ".png")).string(),
                      sv::render_image(scene, view.view_id));
    sv::write_pfm((out / ("depth_" + id + ".pfm")).string(),
                  sv::render_depth(scene, view.view_id));
  }

  sv::NoiseSpec noise;
  noise.match_sigma = opts.match_sigma;
  noise.outlier_fraction = opts.outlier_fraction;
  for (size_t a = 0; a < scene.rig.views.size(); ++a) {
    for (size_t b = a + 1; b < scene.rig.views.size(); ++b) {
      const int vi = scene.rig.views[a].view_id;
      const int vj = scene.rig.views[b].view_id;
      sv::LabeledMatches labeled;
      try {
        labeled = sv::sample_matches(scene, vi, vj, opts.match_count, noise,
                                     pair_seed(opts.seed, vi, vj));
      } catch (const sv::Error& e) {
        if (e.code() == "NoOverlap") continue;
        throw;
      }
      const std::string tag =
          std::to_string(vi) + "_" + std::to_string(vj) + ".txt";
      sv::write_match_file((out / "matches" / ("matches_" + tag)).string(),
                           labeled.matches);
      sv::MatchLabelData labels;
      labels.is_outlier = labeled.is_outlier;
      labels.gt_depth_i = labeled.gt_depth_i;
      labels.gt_depth_j = labeled.gt_depth_j;
      sv::write_match_labels((out / "labels" / ("labels_" + tag)).string(),
                             labels);
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// estimate-depth

struct EstimateOpts {
  std::string rig;
  std::string matches;
  std::string out;
  int threads = 0;
  double d_nn = 3.0;
  int min_common_points = 100;
  int neighbor_view_limit = 0;
  double tau_rc = 1.0;
  double tau_base = 0.05;
  double alpha = 0.1;
  int iterations = 2000;
};

sv::DepthField run_estimate(const EstimateOpts& opts) {
  const sv::CameraRig rig = sv::read_rig(opts.rig);
  sv::MatchGraph graph;
  for (sv::MatchSet& set : sv::read_match_directory(opts.matches)) {
    graph.add(std::move(set));
  }

  sv::PropagationConfig prop;
  prop.d_nn = opts.d_nn;
  prop.min_common_points = opts.min_common_points;
  prop.neighbor_view_limit = opts.neighbor_view_limit;
  std::vector<sv::PropagationChainSet> chains;
  if (rig.views.size() >= 3) {
    chains = sv::build_all_chains(rig, graph, prop);
  }

  sv::SolverConfig solver;
  solver.iterations = opts.iterations;
  sv::FilterConfig filter;
  filter.tau_rc = opts.tau_rc;
  filter.tau_base = opts.tau_base;
  filter.alpha = opts.alpha;

  const sv::DepthField field =
      sv::solve_depths(rig, graph, chains, solver, filter);

  const fs::path out(opts.out);
  ensure_dir(out);
  sv::write_depth_field((out / "depth_field.txt").string(), field);

  json report;
  report["initial_loss"] = field.stats.initial_loss;
  report["final_loss"] = field.stats.final_loss;
  report["iterations"] = field.stats.iterations;
  report["rc_pass"] = field.stats.rc_pass;
  report["rc_total"] = field.stats.rc_total;
  report["ppc_pass"] = field.stats.ppc_pass;
  report["ppc_total"] = field.stats.ppc_total;
  report["pairs"] = field.pairs.size();
  report["chain_sets"] = field.chains.size();
  report["loss_curve"] = field.stats.loss_curve;
  write_json_file(out / "report.json", report);
  return field;
}

// ---------------------------------------------------------------------------
// align

struct AlignOpts {
  std::string mono;
  std::string field;
  std::string out;
  int view = 0;
  int rounds = 3;
  double trim_fraction = 0.1;
};

json run_align(const AlignOpts& opts) {
  const sv::DepthMap mono = sv::read_pfm(opts.mono);
  const sv::DepthField field = sv::read_depth_field(opts.field);
  const sv::SparseDepthSamples samples =
      sv::collect_view_samples(field, opts.view);
  const sv::AffineDepthFit fit =
      sv::fit_scale_offset(mono, samples, opts.rounds, opts.trim_fraction);
  const sv::DepthMap aligned = sv::apply_affine(mono, fit);

  const fs::path out(opts.out);
  ensure_dir(out);
  const std::string id = std::to_string(opts.view);
  sv::write_pfm((out / ("aligned_" + id + ".pfm")).string(), aligned);

  size_t inliers = 0;
  for (const uint8_t m : fit.inlier_mask) inliers += (m != 0);
  json report;
  report["view"] = opts.view;
  report["scale"] = fit.scale;
  report["offset"] = fit.offset;
  report["rms_residual"] = fit.rms_residual;
  report["samples"] = samples.size();
  report["inliers"] = inliers;
  write_json_file(out / ("align_report_" + id + ".json"), report);
  return report;
}

// ---------------------------------------------------------------------------
// warp / fuse

struct WarpOpts {
  std::string rig;
  std::string data;
  std::string poses;  // optional pose file; empty = generate
  std::string out;
  uint64_t seed = 0;
  int threads = 0;
  int count = 2;
  int k = 2;
  double w_rot = 1.0;
  int fill_radius = 16;
};

void write_virtual_files(const fs::path& dir, const std::string& base,
                         const sv::VirtualView& view) {
  sv::write_png_rgb((dir / (base + ".png")).string(), view.image);
  sv::write_pfm((dir / (base + ".pfm")).string(), view.depth);
  sv::write_png_mask((dir / (base + "_mask.png")).string(), view.mask);
}

// Warps every requested virtual pose: per-source bidirectional warps are
// persisted alongside the fused result so `fuse` can re-combine them.
json run_warp_core(const std::vector<sv::SourceView>& sources,
                   const std::vector<sv::CameraPose>& poses,
                   const sv::WarpConfig& config, const fs::path& out) {
  if (sources.empty()) {
    sv::fail("InsufficientViews", "warping needs at least one source view");
  }
  if (config.k < 1 || config.k > static_cast<int>(sources.size())) {
    sv::fail("ConfigOutOfRange",
             "--k-fuse must lie between 1 and the number of source views");
  }
  ensure_dir(out);
  json manifest;
  manifest["config"] = json{{"fill_radius", config.fill_radius},
                            {"k", config.k},
                            {"w_rot", config.w_rot}};
  manifest["intrinsics"] = intrinsics_to_json(sources.front().cam.intrinsics);

  json entries = json::array();
  for (size_t n = 0; n < poses.size(); ++n) {
    sv::CameraView vir_cam;
    vir_cam.view_id = static_cast<int>(n);
    vir_cam.intrinsics = sources.front().cam.intrinsics;
    vir_cam.pose = poses[n];

    std::vector<double> scores(sources.size());
    std::vector<size_t> order(sources.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t s = 0; s < sources.size(); ++s) {
      scores[s] =
          sv::pose_score(sources[s].cam.pose, vir_cam.pose, config.w_rot);
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return sources[a].cam.view_id < sources[b].cam.view_id;
    });

    const std::string vtag = "vir_" + std::to_string(n);
    std::vector<sv::VirtualView> warped;
    json source_entries = json::array();
    for (int r = 0; r < config.k; ++r) {
      const sv::SourceView& src = sources[order[static_cast<size_t>(r)]];
      const sv::ForwardWarp forward = sv::warp_depth_forward(
          src.depth, src.cam, vir_cam, config.fill_radius);
      auto [image, mask] =
          sv::warp_image_backward(src.image, src.cam, vir_cam, forward.depth);
      sv::VirtualView view;
      view.cam = vir_cam;
      view.image = std::move(image);
      view.depth = forward.depth;
      view.mask = std::move(mask);
      view.sources.push_back(
          {src.cam.view_id, scores[order[static_cast<size_t>(r)]]});
      const std::string stag =
          vtag + "_src_" + std::to_string(src.cam.view_id);
      write_virtual_files(out, stag, view);
      source_entries.push_back(
          json{{"view_id", src.cam.view_id},
               {"score", scores[order[static_cast<size_t>(r)]]},
               {"image", stag + ".png"},
               {"depth", stag + ".pfm"},
               {"mask", stag + "_mask.png"}});
      warped.push_back(std::move(view));
    }
    const sv::VirtualView fused = sv::fuse_topk(warped, config.k);
    write_virtual_files(out, vtag, fused);
    entries.push_back(json{{"index", n},
                           {"pose", pose_to_json(poses[n])},
                           {"fused", json{{"image", vtag + ".png"},
                                          {"depth", vtag + ".pfm"},
                                          {"mask", vtag + "_mask.png"}}},
                           {"sources", source_entries}});
  }
  manifest["virtual_views"] = entries;
  write_json_file(out / "warp_manifest.json", manifest);
  return manifest;
}

std::vector<sv::SourceView> load_sources(const sv::CameraRig& rig,
                                         const fs::path& image_dir,
                                         const std::string& image_prefix,
                                         const fs::path& depth_dir,
                                         const std::string& depth_prefix) {
  std::vector<sv::SourceView> sources;
  sources.reserve(rig.views.size());
  for (const sv::CameraView& view : rig.views) {
    const std::string id = std::to_string(view.view_id);
    sv::SourceView src;
    src.cam = view;
    src.image =
        sv::read_png_rgb((image_dir / (image_prefix + id + ".png")).string());
    src.depth =
        sv::read_pfm((depth_dir / (depth_prefix + id + ".pfm")).string());
    sources.push_back(std::move(src));
  }
  return sources;
}

json run_warp(const WarpOpts& opts) {
  const sv::CameraRig rig = sv::read_rig(opts.rig);
  const fs::path data(opts.data);
  const std::vector<sv::SourceView> sources =
      load_sources(rig, data, "view_", data, "depth_");
  std::vector<sv::CameraPose> poses;
  if (!opts.poses.empty()) {
    poses = sv::read_poses(opts.poses);
  } else {
    poses = sv::generate_virtual_poses(rig, opts.count, opts.seed);
  }
  sv::WarpConfig config;
  config.fill_radius = opts.fill_radius;
  config.w_rot = opts.w_rot;
  config.k = opts.k;
  return run_warp_core(sources, poses, config, fs::path(opts.out));
}

struct FuseOpts {
  std::string manifest;
  std::string out;
  int k = 2;
};

void run_fuse(const FuseOpts& opts) {
  const fs::path manifest_path(opts.manifest);
  const json manifest = read_json_file(manifest_path);
  const fs::path base = manifest_path.parent_path();
  const sv::CameraIntrinsics intr =
      intrinsics_from_json(manifest.at("intrinsics"));
  const fs::path out(opts.out);
  ensure_dir(out);

  json report;
  report["k"] = opts.k;
  json fused_entries = json::array();
  for (const json& entry : manifest.at("virtual_views")) {
    sv::CameraView cam;
    cam.view_id = entry.at("index");
    cam.intrinsics = intr;
    cam.pose = pose_from_json(entry.at("pose"));
    std::vector<sv::VirtualView> views;
    for (const json& src : entry.at("sources")) {
      sv::VirtualView view;
      view.cam = cam;
      view.image =
          sv::read_png_rgb((base / src.at("image").get<std::string>()).string());
      view.depth =
          sv::read_pfm((base / src.at("depth").get<std::string>()).string());
      view.mask = sv::read_png_mask(
          (base / src.at("mask").get<std::string>()).string());
      view.sources.push_back({src.at("view_id").get<int>(),
                              src.at("score").get<double>()});
      views.push_back(std::move(view));
    }
    if (opts.k < 1 || opts.k > static_cast<int>(views.size())) {
      sv::fail("ConfigOutOfRange",
               "--k-fuse must lie between 1 and the stored source count");
    }
    const sv::VirtualView fused = sv::fuse_topk(views, opts.k);
    const std::string tag = "fused_" + std::to_string(cam.view_id);
    write_virtual_files(out, tag, fused);
    fused_entries.push_back(json{{"index", cam.view_id},
                                 {"image", tag + ".png"},
                                 {"depth", tag + ".pfm"},
                                 {"mask", tag + "_mask.png"}});
  }
  report["fused"] = fused_entries;
  write_json_file(out / "fuse_report.json", report);
}

// ---------------------------------------------------------------------------
// occlusion-mask

struct OcclusionOpts {
  std::string depth;
  std::string image;
  std::string out;
  int threads = 0;
  int n_slices = 8;
  double edge_threshold = 0.1;
  int min_region_area = 16;
  std::string inpaint = "diffusion";
};

json run_occlusion(const OcclusionOpts& opts) {
  const sv::DepthMap depth = sv::read_pfm(opts.depth);
  const sv::Image image = sv::read_png_rgb(opts.image);
  sv::require_same_size(depth.width, depth.height, image.width, image.height);

  sv::OcclusionConfig config;
  config.n_slices = opts.n_slices;
  config.edge_threshold = opts.edge_threshold;
  config.min_region_area = opts.min_region_area;
  const sv::OcclusionMaskSet masks = sv::local_foreground_mask(depth, config);

  const fs::path out(opts.out);
  ensure_dir(out);
  sv::write_png_gray((out / "edge_map.png").string(), masks.edge_map, 0.0f,
                     1.0f);
  sv::FloatMap slice_vis(depth.width, depth.height, 0.0f);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      slice_vis.at(x, y) =
          static_cast<float>(std::max(0, masks.slice_index.at(x, y)));
    }
  }
  sv::write_png_gray((out / "slice_index.png").string(), slice_vis, 0.0f,
                     static_cast<float>(config.n_slices - 1));
  sv::write_png_mask((out / "local_fg.png").string(), masks.local_fg);
  sv::write_png_mask((out / "slice_mask.png").string(), masks.slice_mask);

  const std::unique_ptr<sv::Inpainter> inpainter =
      sv::make_inpainter(opts.inpaint);
  sv::write_png_rgb((out / "inpainted.png").string(),
                    inpainter->inpaint(image, masks.local_fg));

  json rects = json::array();
  for (const sv::PixelRect& r : masks.rects) {
    rects.push_back(
        json{{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}});
  }
  json report;
  report["fg_slice"] = masks.fg_slice;
  report["n_slices"] = config.n_slices;
  report["edge_threshold"] = config.edge_threshold;
  report["min_region_area"] = config.min_region_area;
  report["rects"] = rects;
  write_json_file(out / "occlusion_report.json", report);
  return report;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string image_a;
  std::string image_b;
  std::string mask;
  std::string depth_a;
  std::string depth_b;
  std::string out;
  double psnr_ceiling = 99.0;
};

json run_eval(const EvalOpts& opts) {
  const bool have_images = !opts.image_a.empty() || !opts.image_b.empty();
  const bool have_depths = !opts.depth_a.empty() || !opts.depth_b.empty();
  if (have_images && (opts.image_a.empty() || opts.image_b.empty())) {
    sv::fail("ConfigOutOfRange", "--image-a and --image-b come as a pair");
  }
  if (have_depths && (opts.depth_a.empty() || opts.depth_b.empty())) {
    sv::fail("ConfigOutOfRange", "--depth-a and --depth-b come as a pair");
  }
  if (!have_images && !have_depths) {
    sv::fail("ConfigOutOfRange",
             "eval needs an image pair and/or a depth pair");
  }

  sv::Mask mask;
  const sv::Mask* mask_ptr = nullptr;
  if (!opts.mask.empty()) {
    mask = sv::read_png_mask(opts.mask);
    mask_ptr = &mask;
  }

  const sv::LossWeights weights;
  json report;
  report["lpips"] = "unavailable";
  report["weights"] = json{{"lambda", weights.lambda},
                           {"alpha", weights.alpha},
                           {"beta", weights.beta}};
  if (have_images) {
    const sv::Image a = sv::read_png_rgb(opts.image_a);
    const sv::Image b = sv::read_png_rgb(opts.image_b);
    const double l1 = sv::l1_loss(a, b, mask_ptr);
    const double s = sv::ssim(a, b, mask_ptr);
    report["l1"] = l1;
    report["ssim"] = s;
    report["l_ssim"] = (1.0 - s) / 2.0;
    report["psnr_db"] = sv::psnr(a, b, mask_ptr, opts.psnr_ceiling);
    report["l_grad"] = sv::grad_l1(a, b, mask_ptr);
    report["l_col"] =
        weights.lambda * l1 + (1.0 - weights.lambda) * (1.0 - s) / 2.0;
  }
  if (have_depths) {
    const sv::DepthMap a = sv::read_pfm(opts.depth_a);
    const sv::DepthMap b = sv::read_pfm(opts.depth_b);
    report["l_tv"] = sv::tv_loss(a);
    try {
      const double r = sv::pcc(a, b, mask_ptr);
      report["pcc"] = r;
      report["l_pcc"] = 1.0 - r;
    } catch (const sv::Error& e) {
      if (e.code() != "ZeroVariance") throw;
      report["pcc"] = nullptr;
      report["l_pcc"] = nullptr;
    }
  }
  if (!opts.out.empty()) {
    ensure_dir(fs::path(opts.out));
    write_json_file(fs::path(opts.out) / "eval_report.json", report);
  }
  return report;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineOpts {
  std::string preset = "plane3view";
  std::string out;
  uint64_t seed = 0;
  int threads = 0;
  int match_count = 800;
  double match_sigma = 0.3;
  double outlier_fraction = 0.05;
  double d_nn = 3.0;
  int min_common_points = 100;
  int neighbor_view_limit = 0;
  double tau_rc = 1.0;
  double tau_base = 0.05;
  double alpha = 0.1;
  int iterations = 2000;
  int virtual_count = 2;
  int k = 2;
  double w_rot = 1.0;
  int fill_radius = 16;
  int n_slices = 8;
  std::string inpaint = "diffusion";
};

// The synthetic stand-in for a monocular depth network: a known affine
// corruption of the rendered ground truth plus a faint spatial ramp (so the
// fit has variance to work with even on fronto-parallel scenes).
sv::DepthMap make_mono_corruption(const sv::DepthMap& gt) {
  constexpr double kScale = 2.0;
  constexpr double kOffset = 0.5;
  constexpr double kRamp = 1e-3;
  sv::DepthMap mono(gt.width, gt.height);
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      if (!gt.is_valid(x, y)) continue;
      const double ramp =
          kRamp * static_cast<double>(x + y) / (gt.width + gt.height);
      mono.set(x, y, static_cast<float>((gt.value(x, y) - kOffset) / kScale +
                                        ramp));
    }
  }
  return mono;
}

void run_pipeline(const PipelineOpts& opts) {
  const fs::path out(opts.out);
  ensure_dir(out);
  json stages = json::array();
  const auto stage_start = [] { return std::chrono::steady_clock::now(); };

  // 1. synth
  auto t0 = stage_start();
  SynthOpts synth;
  synth.preset = opts.preset;
  synth.out = (out / "synth").string();
  synth.seed = opts.seed;
  synth.match_count = opts.match_count;
  synth.match_sigma = opts.match_sigma;
  synth.outlier_fraction = opts.outlier_fraction;
  const sv::SyntheticScene scene = run_synth(synth);
  stages.push_back(json{
      {"name", "synth"},
      {"config", json{{"preset", opts.preset},
                      {"match_count", opts.match_count},
                      {"match_sigma", opts.match_sigma},
                      {"outlier_fraction", opts.outlier_fraction}}},
      {"outputs", json::array({"synth"})},
      {"wall_time_ms", elapsed_ms(t0)}});

  // 2. estimate-depth
  t0 = stage_start();
  EstimateOpts est;
  est.rig = (out / "synth" / "rig.json").string();
  est.matches = (out / "synth" / "matches").string();
  est.out = (out / "depth").string();
  est.d_nn = opts.d_nn;
  est.min_common_points = opts.min_common_points;
  est.neighbor_view_limit = opts.neighbor_view_limit;
  est.tau_rc = opts.tau_rc;
  est.tau_base = opts.tau_base;
  est.alpha = opts.alpha;
  est.iterations = opts.iterations;
  const sv::DepthField field = run_estimate(est);
  stages.push_back(json{
      {"name", "estimate-depth"},
      {"config", json{{"d_nn", opts.d_nn},
                      {"min_common_points", opts.min_common_points},
                      {"tau_rc", opts.tau_rc},
                      {"tau_base", opts.tau_base},
                      {"alpha", opts.alpha},
                      {"iterations", opts.iterations}}},
      {"outputs", json::array({"depth"})},
      {"wall_time_ms", elapsed_ms(t0)}});

  // 3. align: corrupt each rendered depth into a fake mono prediction, then
  // recover the affine map from the solved sparse depths.
  t0 = stage_start();
  const fs::path align_dir = out / "align";
  ensure_dir(align_dir);
  for (const sv::CameraView& view : scene.rig.views) {
    const std::string id = std::to_string(view.view_id);
    const sv::DepthMap gt = sv::read_pfm(
        (out / "synth" / ("depth_" + id + ".pfm")).string());
    const sv::DepthMap mono = make_mono_corruption(gt);
    sv::write_pfm((align_dir / ("mono_" + id + ".pfm")).string(), mono);
    AlignOpts align;
    align.mono = (align_dir / ("mono_" + id + ".pfm")).string();
    align.field = (out / "depth" / "depth_field.txt").string();
    align.out = align_dir.string();
    align.view = view.view_id;
    run_align(align);
  }
  stages.push_back(json{
      {"name", "align"},
      {"config", json{{"mono_scale", 2.0},
                      {"mono_offset", 0.5},
                      {"mono_ramp", 1e-3},
                      {"rounds", 3},
                      {"trim_fraction", 0.1}}},
      {"outputs", json::array({"align"})},
      {"wall_time_ms", elapsed_ms(t0)}});

  // 4. warp: aligned depths + rendered images -> fused virtual views.
  t0 = stage_start();
  const std::vector<sv::SourceView> sources = load_sources(
      scene.rig, out / "synth", "view_", align_dir, "aligned_");
  const std::vector<sv::CameraPose> poses =
      sv::generate_virtual_poses(scene.rig, opts.virtual_count, opts.seed);
  sv::WarpConfig warp_config;
  warp_config.fill_radius = opts.fill_radius;
  warp_config.w_rot = opts.w_rot;
  warp_config.k = opts.k;
  run_warp_core(sources, poses, warp_config, out / "warp");
  stages.push_back(json{
      {"name", "warp"},
      {"config", json{{"virtual_count", opts.virtual_count},
                      {"k", opts.k},
                      {"w_rot", opts.w_rot},
                      {"fill_radius", opts.fill_radius}}},
      {"outputs", json::array({"warp"})},
      {"wall_time_ms", elapsed_ms(t0)}});

  // 5. occlusion analysis on the first view's aligned depth.
  t0 = stage_start();
  const int first_view = scene.rig.views.front().view_id;
  OcclusionOpts occ;
  occ.depth =
      (align_dir / ("aligned_" + std::to_string(first_view) + ".pfm"))
          .string();
  occ.image =
      (out / "synth" / ("view_" + std::to_string(first_view) + ".png"))
          .string();
  occ.out = (out / "occlusion").string();
  occ.n_slices = opts.n_slices;
  occ.inpaint = opts.inpaint;
  run_occlusion(occ);
  stages.push_back(json{{"name", "occlusion-mask"},
                        {"config", json{{"n_slices", opts.n_slices},
                                        {"view", first_view},
                                        {"inpaint", opts.inpaint}}},
                        {"outputs", json::array({"occlusion"})},
                        {"wall_time_ms", elapsed_ms(t0)}});

  // 6. eval: fused virtual view 0 against the oracle render at its pose,
  // plus the training-stage depth losses for the first view.
  t0 = stage_start();
  const fs::path eval_dir = out / "eval";
  ensure_dir(eval_dir);
  sv::CameraView vir_cam;
  vir_cam.view_id = -1;
  vir_cam.intrinsics = scene.rig.views.front().intrinsics;
  vir_cam.pose = poses.front();
  const sv::Image oracle_image = sv::render_image(scene, vir_cam);
  const sv::DepthMap oracle_depth = sv::render_depth(scene, vir_cam);
  sv::write_png_rgb((eval_dir / "oracle_0.png").string(), oracle_image);
  sv::write_pfm((eval_dir / "oracle_0.pfm").string(), oracle_depth);

  const sv::Image fused_image =
      sv::read_png_rgb((out / "warp" / "vir_0.png").string());
  const sv::DepthMap fused_depth =
      sv::read_pfm((out / "warp" / "vir_0.pfm").string());
  const sv::Mask fused_mask =
      sv::read_png_mask((out / "warp" / "vir_0_mask.png").string());
  const sv::DepthMap aligned_first = sv::read_pfm(
      (align_dir / ("aligned_" + std::to_string(first_view) + ".pfm"))
          .string());

  sv::LossInputs inputs;
  inputs.rendered_image = &fused_image;
  inputs.reference_image = &oracle_image;
  inputs.image_mask = &fused_mask;
  inputs.rendered_depth = &aligned_first;
  inputs.view_id = first_view;
  inputs.rig = &scene.rig;
  inputs.field = &field;
  inputs.virtual_rendered_image = &fused_image;
  inputs.virtual_reference_image = &oracle_image;
  inputs.virtual_mask = &fused_mask;
  inputs.virtual_rendered_depth = &fused_depth;
  inputs.virtual_reference_depth = &oracle_depth;

  const sv::LossWeights weights;
  bool pcc_defined = true;
  sv::LossReport loss;
  try {
    loss = sv::total_loss(inputs, weights);
  } catch (const sv::Error& e) {
    if (e.code() != "ZeroVariance") throw;
    pcc_defined = false;
    inputs.virtual_rendered_depth = nullptr;
    inputs.virtual_reference_depth = nullptr;
    loss = sv::total_loss(inputs, weights);
  }
  json eval_report;
  eval_report["lpips"] = "unavailable";
  eval_report["l1"] = loss.l1;
  eval_report["ssim"] = loss.ssim;
  eval_report["l_ssim"] = loss.l_ssim;
  eval_report["psnr_db"] = loss.psnr_db;
  eval_report["l_rc_train"] = loss.l_rc_train;
  eval_report["l_ppc_train"] = loss.l_ppc_train;
  eval_report["l_tv"] = loss.l_tv;
  eval_report["l_grad"] = loss.l_grad;
  eval_report["ssim_vir"] = loss.ssim_vir;
  eval_report["l_ssim_vir"] = loss.l_ssim_vir;
  if (pcc_defined) {
    eval_report["pcc"] = loss.pcc;
    eval_report["l_pcc"] = loss.l_pcc;
  } else {
    eval_report["pcc"] = nullptr;
    eval_report["l_pcc"] = nullptr;
  }
  eval_report["l_col"] = loss.l_col;
  eval_report["l_dep"] = loss.l_dep;
  eval_report["l_col_vir"] = loss.l_col_vir;
  eval_report["l_dep_vir"] = loss.l_dep_vir;
  eval_report["total"] = loss.total;
  eval_report["weights"] = json{{"lambda", weights.lambda},
                                {"alpha", weights.alpha},
                                {"beta", weights.beta}};
  write_json_file(eval_dir / "eval_report.json", eval_report);
  stages.push_back(json{{"name", "eval"},
                        {"config", json{{"virtual_index", 0}}},
                        {"outputs", json::array({"eval"})},
                        {"wall_time_ms", elapsed_ms(t0)}});

  json manifest;
  manifest["preset"] = opts.preset;
  manifest["seed"] = opts.seed;
  manifest["version"] = kVersion;
  manifest["stages"] = stages;
  write_json_file(out / "manifest.json", manifest);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-view reconstruction geometry toolkit"};
  app.require_subcommand(1);

  SynthOpts synth_opts;
  auto* synth = app.add_subcommand(
      "synth", "Render a synthetic preset: rig, images, depths, matches");
  synth->add_option("--preset", synth_opts.preset,
                    "plane3view | occluder-square | sphere-ring-8")
      ->required();
  synth->add_option("--out", synth_opts.out, "output directory")->required();
  synth->add_option("--seed", synth_opts.seed, "RNG seed");
  synth->add_option("--threads", synth_opts.threads,
                    "worker threads (0 = hardware)");
  synth->add_option("--match-count", synth_opts.match_count,
                    "matches sampled per view pair");
  synth->add_option("--match-sigma", synth_opts.match_sigma,
                    "Gaussian pixel jitter");
  synth->add_option("--outlier-fraction", synth_opts.outlier_fraction,
                    "fraction of matches replaced by outliers");

  EstimateOpts est_opts;
  auto* est = app.add_subcommand(
      "estimate-depth", "Solve per-match depths from a match directory");
  est->add_option("--rig", est_opts.rig, "rig JSON")->required();
  est->add_option("--matches", est_opts.matches, "match directory")
      ->required();
  est->add_option("--out", est_opts.out, "output directory")->required();
  est->add_option("--threads", est_opts.threads, "worker threads");
  est->add_option("--d-nn", est_opts.d_nn, "mutual-NN distance threshold");
  est->add_option("--min-common-points", est_opts.min_common_points,
                  "minimum chain-set size");
  est->add_option("--neighbor-view-limit", est_opts.neighbor_view_limit,
                  "bridge partners per view (0 = all)");
  est->add_option("--tau-rc", est_opts.tau_rc, "reprojection gate, pixels");
  est->add_option("--tau-base", est_opts.tau_base,
                  "base relative-depth threshold");
  est->add_option("--alpha", est_opts.alpha, "dynamic-threshold scale");
  est->add_option("--iterations", est_opts.iterations, "solver iterations");

  AlignOpts align_opts;
  auto* align = app.add_subcommand(
      "align", "Fit scale/offset of a mono depth map to solved depths");
  align->add_option("--mono", align_opts.mono, "mono depth PFM")->required();
  align->add_option("--field", align_opts.field, "depth field file")
      ->required();
  align->add_option("--view", align_opts.view, "view id")->required();
  align->add_option("--out", align_opts.out, "output directory")->required();
  align->add_option("--rounds", align_opts.rounds, "trim rounds");
  align->add_option("--trim-fraction", align_opts.trim_fraction,
                    "fraction trimmed per round");

  WarpOpts warp_opts;
  auto* warp = app.add_subcommand(
      "warp", "Synthesize virtual views by bidirectional warping");
  warp->add_option("--rig", warp_opts.rig, "rig JSON")->required();
  warp->add_option("--data", warp_opts.data,
                   "directory with view_<id>.png and depth_<id>.pfm")
      ->required();
  warp->add_option("--out", warp_opts.out, "output directory")->required();
  warp->add_option("--poses", warp_opts.poses,
                   "pose JSON (default: generate --count poses)");
  warp->add_option("--count", warp_opts.count, "virtual poses to generate");
  warp->add_option("--seed", warp_opts.seed, "RNG seed");
  warp->add_option("--threads", warp_opts.threads, "worker threads");
  warp->add_option("--k-fuse", warp_opts.k, "sources fused per view");
  warp->add_option("--w-rot", warp_opts.w_rot, "rotation weight, per radian");
  warp->add_option("--fill-radius", warp_opts.fill_radius,
                   "hole-filling radius, pixels");

  FuseOpts fuse_opts;
  auto* fuse = app.add_subcommand(
      "fuse", "Re-fuse pre-warped virtual views from a warp manifest");
  fuse->add_option("--manifest", fuse_opts.manifest, "warp_manifest.json")
      ->required();
  fuse->add_option("--out", fuse_opts.out, "output directory")->required();
  fuse->add_option("--k-fuse", fuse_opts.k, "sources fused per view");

  OcclusionOpts occ_opts;
  auto* occ = app.add_subcommand(
      "occlusion-mask", "Depth-difference occlusion masks and inpainting");
  occ->add_option("--depth", occ_opts.depth, "depth PFM")->required();
  occ->add_option("--image", occ_opts.image, "RGB PNG")->required();
  occ->add_option("--out", occ_opts.out, "output directory")->required();
  occ->add_option("--threads", occ_opts.threads, "worker threads");
  occ->add_option("--n-slices", occ_opts.n_slices, "depth layers (>= 2)");
  occ->add_option("--edge-threshold", occ_opts.edge_threshold,
                  "normalized Sobel threshold in (0,1)");
  occ->add_option("--min-region-area", occ_opts.min_region_area,
                  "minimum candidate component area, pixels");
  occ->add_option("--inpaint", occ_opts.inpaint,
                  "diffusion | external:<command>");

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand(
      "eval", "Loss/quality report for image and/or depth pairs");
  eval->add_option("--image-a", eval_opts.image_a, "first image PNG");
  eval->add_option("--image-b", eval_opts.image_b, "second image PNG");
  eval->add_option("--mask", eval_opts.mask, "mask PNG");
  eval->add_option("--depth-a", eval_opts.depth_a, "first depth PFM");
  eval->add_option("--depth-b", eval_opts.depth_b, "second depth PFM");
  eval->add_option("--out", eval_opts.out,
                   "directory for eval_report.json (also printed)");
  eval->add_option("--psnr-ceiling", eval_opts.psnr_ceiling,
                   "PSNR cap in dB");

  PipelineOpts pipe_opts;
  auto* pipe = app.add_subcommand(
      "pipeline", "Chain synth -> depth -> align -> warp -> occlusion -> eval");
  pipe->add_option("--preset", pipe_opts.preset, "scene preset")->required();
  pipe->add_option("--out", pipe_opts.out, "output directory")->required();
  pipe->add_option("--seed", pipe_opts.seed, "RNG seed");
  pipe->add_option("--threads", pipe_opts.threads, "worker threads");
  pipe->add_option("--match-count", pipe_opts.match_count,
                   "matches per view pair");
  pipe->add_option("--match-sigma", pipe_opts.match_sigma,
                   "match jitter, pixels");
  pipe->add_option("--outlier-fraction", pipe_opts.outlier_fraction,
                   "injected outlier fraction");
  pipe->add_option("--d-nn", pipe_opts.d_nn, "mutual-NN threshold");
  pipe->add_option("--min-common-points", pipe_opts.min_common_points,
                   "minimum chain-set size");
  pipe->add_option("--neighbor-view-limit", pipe_opts.neighbor_view_limit,
                   "bridge partners per view (0 = all)");
  pipe->add_option("--tau-rc", pipe_opts.tau_rc, "reprojection gate");
  pipe->add_option("--tau-base", pipe_opts.tau_base, "base depth threshold");
  pipe->add_option("--alpha", pipe_opts.alpha, "dynamic-threshold scale");
  pipe->add_option("--iterations", pipe_opts.iterations, "solver iterations");
  pipe->add_option("--virtual-count", pipe_opts.virtual_count,
                   "virtual views to synthesize");
  pipe->add_option("--k-fuse", pipe_opts.k, "sources fused per view");
  pipe->add_option("--w-rot", pipe_opts.w_rot, "rotation weight");
  pipe->add_option("--fill-radius", pipe_opts.fill_radius,
                   "hole-filling radius");
  pipe->add_option("--n-slices", pipe_opts.n_slices, "depth layers");
  pipe->add_option("--inpaint", pipe_opts.inpaint,
                   "diffusion | external:<command>");

  try {
    app.parse(argc, argv);
    if (*synth) {
      apply_threads(synth_opts.threads);
      run_synth(synth_opts);
    } else if (*est) {
      apply_threads(est_opts.threads);
      run_estimate(est_opts);
    } else if (*align) {
      apply_threads(0);
      run_align(align_opts);
    } else if (*warp) {
      apply_threads(warp_opts.threads);
      run_warp(warp_opts);
    } else if (*fuse) {
      apply_threads(0);
      run_fuse(fuse_opts);
    } else if (*occ) {
      apply_threads(occ_opts.threads);
      run_occlusion(occ_opts);
    } else if (*eval) {
      apply_threads(0);
      std::cout << run_eval(eval_opts).dump(2) << "\n";
    } else if (*pipe) {
      apply_threads(pipe_opts.threads);
      run_pipeline(pipe_opts);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return 2;
  } catch (const sv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
