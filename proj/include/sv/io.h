#pragma once

#include <string>
#include <vector>

#include "sv/correspondence.h"
#include "sv/depth_solver.h"
#include "sv/geometry.h"
#include "sv/image.h"

namespace sv {

// ---- PFM depth maps -------------------------------------------------------
// Single-channel "Pf", scale line "-1.0" (little-endian), rows stored bottom
// to top. Invalid pixels are written as 0.0; non-positive or non-finite
// values read back as invalid.
void write_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_pfm(const std::string& path);

// ---- PNG images -----------------------------------------------------------
// 8-bit RGB; float intensities clamped to [0,1] and rounded.
void write_png_rgb(const std::string& path, const Image& image);
Image read_png_rgb(const std::string& path);

// Single-channel 0/255 masks; values >= 128 read back as 1.
void write_png_mask(const std::string& path, const Mask& mask);
Mask read_png_mask(const std::string& path);

// Grayscale visualization of a float map linearly mapped from [lo, hi].
void write_png_gray(const std::string& path, const FloatMap& map, float lo,
                    float hi);

// ---- Camera rig -----------------------------------------------------------
// JSON object {"views": [...]} where each view carries view_id, fx, fy, cx,
// cy, width, height, rotation (9 numbers row-major), translation (3).
void write_rig(const std::string& path, const CameraRig& rig);
CameraRig read_rig(const std::string& path);

// JSON object {"poses": [{"rotation": [9], "translation": [3]}, ...]}.
void write_poses(const std::string& path,
                 const std::vector<CameraPose>& poses);
std::vector<CameraPose> read_poses(const std::string& path);

// ---- Match files ----------------------------------------------------------
// Whitespace-delimited text, one row per correspondence:
//   view_i view_j x_i y_i x_j y_j
void write_match_file(const std::string& path, const MatchSet& set);
MatchSet read_match_file(const std::string& path);

// Reads every *.txt in the directory (sorted by filename), one MatchSet per
// file. Throws MissingInput when the directory does not exist.
std::vector<MatchSet> read_match_directory(const std::string& dir);

// Ground-truth sidecar for synthetic matches, one row per correspondence:
//   is_outlier gt_depth_i gt_depth_j
struct MatchLabelData {
  std::vector<uint8_t> is_outlier;
  std::vector<double> gt_depth_i;
  std::vector<double> gt_depth_j;
};
void write_match_labels(const std::string& path, const MatchLabelData& labels);
MatchLabelData read_match_labels(const std::string& path);

// ---- Depth field ----------------------------------------------------------
// Self-contained text format. Pair rows appear once per side:
//   pairs <row_count>
//   view other index x y z err rc
// followed by chain rows:
//   chains <row_count>
//   view_i bridge_j view_k index idx_ij idx_jk bridge_gap ppc
// Solver statistics are not serialized (the CLI writes them to a report).
void write_depth_field(const std::string& path, const DepthField& field);
DepthField read_depth_field(const std::string& path);

// Shortest round-trip decimal formatting used by all text writers.
std::string format_double(double value);

}  // namespace sv
