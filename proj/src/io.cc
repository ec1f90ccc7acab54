#include "sv/io.h"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace sv {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

FILE* open_or_fail(const std::string& path, const char* mode) {
  FILE* f = std::fopen(path.c_str(), mode);
  if (!f) {
    if (mode[0] == 'r') fail("MissingInput", "cannot open " + path);
    fail("IoError", "cannot write " + path);
  }
  return f;
}

[[noreturn]] void parse_fail(const std::string& path, const std::string& why) {
  fail("ParseError", path + ": " + why);
}

}  // namespace

// ---- PFM -------------------------------------------------------------------

void write_pfm(const std::string& path, const DepthMap& depth) {
  FILE* f = open_or_fail(path, "wb");
  std::fprintf(f, "Pf\n%d %d\n-1.0\n", depth.width, depth.height);
  std::vector<float> row(static_cast<size_t>(depth.width));
  for (int y = depth.height - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width; ++x) {
      row[static_cast<size_t>(x)] = depth.is_valid(x, y) ? depth.value(x, y) : 0.f;
    }
    if (std::fwrite(row.data(), sizeof(float), row.size(), f) != row.size()) {
      std::fclose(f);
      fail("IoError", "short write to " + path);
    }
  }
  std::fclose(f);
}

DepthMap read_pfm(const std::string& path) {
  FILE* f = open_or_fail(path, "rb");
  char magic[3] = {0};
  int w = 0, h = 0;
  double scale = 0.0;
  if (std::fscanf(f, "%2s", magic) != 1 || std::string(magic) != "Pf") {
    std::fclose(f);
    parse_fail(path, "expected single-channel PFM magic 'Pf'");
  }
  if (std::fscanf(f, "%d %d", &w, &h) != 2 || w <= 0 || h <= 0) {
    std::fclose(f);
    parse_fail(path, "bad PFM dimensions");
  }
  if (std::fscanf(f, "%lf", &scale) != 1 || scale == 0.0) {
    std::fclose(f);
    parse_fail(path, "bad PFM scale");
  }
  std::fgetc(f);  // single whitespace before the raster

  DepthMap depth(w, h);
  std::vector<float> row(static_cast<size_t>(w));
  for (int y = h - 1; y >= 0; --y) {
    if (std::fread(row.data(), sizeof(float), row.size(), f) != row.size()) {
      std::fclose(f);
      parse_fail(path, "truncated PFM raster");
    }
    for (int x = 0; x < w; ++x) {
      float v = row[static_cast<size_t>(x)];
      if (scale > 0) {  // big-endian raster
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) |
               ((bits >> 8) & 0xff00) | (bits >> 24);
        std::memcpy(&v, &bits, 4);
      }
      if (std::isfinite(v) && v > 0.f) depth.set(x, y, v);
    }
  }
  std::fclose(f);
  return depth;
}

// ---- PNG -------------------------------------------------------------------

namespace {

void write_png_bytes(const std::string& path, int width, int height,
                     int color_type, const std::vector<uint8_t>& bytes) {
  FILE* f = open_or_fail(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    fail("IoError", "libpng failure writing " + path);
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride =
      static_cast<size_t>(width) * (color_type == PNG_COLOR_TYPE_RGB ? 3 : 1);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + y * stride));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

std::vector<uint8_t> read_png_rgb_bytes(const std::string& path, int* width,
                                        int* height) {
  FILE* f = open_or_fail(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  std::vector<uint8_t> bytes;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    fail("ParseError", path + ": libpng failure");
  }
  png_init_io(png, f);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  *width = static_cast<int>(png_get_image_width(png, info));
  *height = static_cast<int>(png_get_image_height(png, info));
  const size_t stride = static_cast<size_t>(*width) * 3;
  bytes.resize(stride * static_cast<size_t>(*height));
  for (int y = 0; y < *height; ++y) {
    png_read_row(png, bytes.data() + y * stride, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return bytes;
}

uint8_t to_byte(float v) {
  return static_cast<uint8_t>(
      std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

}  // namespace

void write_png_rgb(const std::string& path, const Image& image) {
  std::vector<uint8_t> bytes(static_cast<size_t>(image.width) * image.height * 3);
  size_t k = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) bytes[k++] = to_byte(image.at(x, y, c));
    }
  }
  write_png_bytes(path, image.width, image.height, PNG_COLOR_TYPE_RGB, bytes);
}

Image read_png_rgb(const std::string& path) {
  int w = 0, h = 0;
  const std::vector<uint8_t> bytes = read_png_rgb_bytes(path, &w, &h);
  Image image(w, h);
  size_t k = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        image.at(x, y, c) = static_cast<float>(bytes[k++]) / 255.f;
      }
    }
  }
  return image;
}

void write_png_mask(const std::string& path, const Mask& mask) {
  std::vector<uint8_t> bytes(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  write_png_bytes(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, bytes);
}

Mask read_png_mask(const std::string& path) {
  int w = 0, h = 0;
  const std::vector<uint8_t> bytes = read_png_rgb_bytes(path, &w, &h);
  Mask mask(w, h);
  for (size_t i = 0; i < mask.size(); ++i) {
    mask.data[i] = bytes[i * 3] >= 128 ? 1 : 0;
  }
  return mask;
}

void write_png_gray(const std::string& path, const FloatMap& map, float lo,
                    float hi) {
  const float span = hi > lo ? hi - lo : 1.f;
  std::vector<uint8_t> bytes(map.size());
  for (size_t i = 0; i < map.size(); ++i) {
    bytes[i] = to_byte((map.data[i] - lo) / span);
  }
  write_png_bytes(path, map.width, map.height, PNG_COLOR_TYPE_GRAY, bytes);
}

// ---- Camera rig / poses ----------------------------------------------------

namespace {

json pose_to_json(const CameraPose& pose) {
  json j;
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  }
  json tr = json::array();
  for (int r = 0; r < 3; ++r) tr.push_back(pose.translation(r));
  j["rotation"] = std::move(rot);
  j["translation"] = std::move(tr);
  return j;
}

CameraPose pose_from_json(const json& j, const std::string& path) {
  if (!j.contains("rotation") || !j.contains("translation")) {
    parse_fail(path, "pose missing rotation/translation");
  }
  const auto& rot = j.at("rotation");
  const auto& tr = j.at("translation");
  if (!rot.is_array() || rot.size() != 9 || !tr.is_array() || tr.size() != 3) {
    parse_fail(path, "rotation must have 9 numbers and translation 3");
  }
  CameraPose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      pose.rotation(r, c) = rot.at(static_cast<size_t>(r * 3 + c)).get<double>();
    }
    pose.translation(r) = tr.at(static_cast<size_t>(r)).get<double>();
  }
  return pose;
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingInput", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    parse_fail(path, e.what());
  }
}

void dump_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail("IoError", "cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

void write_rig(const std::string& path, const CameraRig& rig) {
  json views = json::array();
  for (const CameraView& v : rig.views) {
    json jv = pose_to_json(v.pose);
    jv["view_id"] = v.view_id;
    jv["fx"] = v.intrinsics.fx;
    jv["fy"] = v.intrinsics.fy;
    jv["cx"] = v.intrinsics.cx;
    jv["cy"] = v.intrinsics.cy;
    jv["width"] = v.intrinsics.width;
    jv["height"] = v.intrinsics.height;
    views.push_back(std::move(jv));
  }
  json j;
  j["views"] = std::move(views);
  dump_json_file(path, j);
}

CameraRig read_rig(const std::string& path) {
  const json j = parse_json_file(path);
  const json* views = nullptr;
  if (j.is_array()) {
    views = &j;
  } else if (j.is_object() && j.contains("views") && j.at("views").is_array()) {
    views = &j.at("views");
  } else {
    parse_fail(path, "expected a view array or an object with \"views\"");
  }
  CameraRig rig;
  for (const json& jv : *views) {
    for (const char* field :
         {"view_id", "fx", "fy", "cx", "cy", "width", "height"}) {
      if (!jv.contains(field)) {
        parse_fail(path, std::string("view missing field \"") + field + "\"");
      }
    }
    CameraView v;
    v.view_id = jv.at("view_id").get<int>();
    v.intrinsics.fx = jv.at("fx").get<double>();
    v.intrinsics.fy = jv.at("fy").get<double>();
    v.intrinsics.cx = jv.at("cx").get<double>();
    v.intrinsics.cy = jv.at("cy").get<double>();
    v.intrinsics.width = jv.at("width").get<int>();
    v.intrinsics.height = jv.at("height").get<int>();
    v.pose = pose_from_json(jv, path);
    rig.views.push_back(std::move(v));
  }
  validate(rig);
  return rig;
}

void write_poses(const std::string& path,
                 const std::vector<CameraPose>& poses) {
  json arr = json::array();
  for (const CameraPose& p : poses) arr.push_back(pose_to_json(p));
  json j;
  j["poses"] = std::move(arr);
  dump_json_file(path, j);
}

std::vector<CameraPose> read_poses(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_object() || !j.contains("poses") || !j.at("poses").is_array()) {
    parse_fail(path, "expected an object with a \"poses\" array");
  }
  std::vector<CameraPose> poses;
  for (const json& jp : j.at("poses")) {
    poses.push_back(pose_from_json(jp, path));
    validate(poses.back());
  }
  return poses;
}

// ---- Match files -----------------------------------------------------------

void write_match_file(const std::string& path, const MatchSet& set) {
  std::ofstream out(path);
  if (!out) fail("IoError", "cannot write " + path);
  for (size_t t = 0; t < set.size(); ++t) {
    out << set.view_i << ' ' << set.view_j << ' '
        << format_double(set.points_i[t].x()) << ' '
        << format_double(set.points_i[t].y()) << ' '
        << format_double(set.points_j[t].x()) << ' '
        << format_double(set.points_j[t].y()) << '\n';
  }
}

MatchSet read_match_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingInput", "cannot open " + path);
  std::vector<double> tokens;
  double v;
  while (in >> v) tokens.push_back(v);
  if (!in.eof()) parse_fail(path, "non-numeric match token");
  if (tokens.size() % 6 != 0) parse_fail(path, "truncated match row");
  MatchSet set;
  for (size_t r = 0; r < tokens.size(); r += 6) {
    const int vi = static_cast<int>(tokens[r]);
    const int vj = static_cast<int>(tokens[r + 1]);
    if (set.points_i.empty()) {
      set.view_i = vi;
      set.view_j = vj;
    } else if (vi != set.view_i || vj != set.view_j) {
      parse_fail(path, "inconsistent view ids across rows");
    }
    set.points_i.emplace_back(tokens[r + 2], tokens[r + 3]);
    set.points_j.emplace_back(tokens[r + 4], tokens[r + 5]);
  }
  return set;
}

std::vector<MatchSet> read_match_directory(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    fail("MissingInput", dir + " is not a directory");
  }
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<MatchSet> sets;
  for (const std::string& p : paths) {
    MatchSet set = read_match_file(p);
    if (set.size() > 0) sets.push_back(std::move(set));
  }
  return sets;
}

void write_match_labels(const std::string& path,
                        const MatchLabelData& labels) {
  std::ofstream out(path);
  if (!out) fail("IoError", "cannot write " + path);
  for (size_t t = 0; t < labels.is_outlier.size(); ++t) {
    out << int(labels.is_outlier[t]) << ' '
        << format_double(labels.gt_depth_i[t]) << ' '
        << format_double(labels.gt_depth_j[t]) << '\n';
  }
}

MatchLabelData read_match_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingInput", "cannot open " + path);
  std::vector<double> tokens;
  double v;
  while (in >> v) tokens.push_back(v);
  if (!in.eof()) parse_fail(path, "non-numeric label token");
  if (tokens.size() % 3 != 0) parse_fail(path, "truncated label row");
  MatchLabelData labels;
  for (size_t r = 0; r < tokens.size(); r += 3) {
    labels.is_outlier.push_back(tokens[r] != 0.0 ? 1 : 0);
    labels.gt_depth_i.push_back(tokens[r + 1]);
    labels.gt_depth_j.push_back(tokens[r + 2]);
  }
  return labels;
}

// ---- Depth field -----------------------------------------------------------

void write_depth_field(const std::string& path, const DepthField& field) {
  std::ofstream out(path);
  if (!out) fail("IoError", "cannot write " + path);
  size_t pair_rows = 0;
  for (const PairDepths& p : field.pairs) pair_rows += 2 * p.size();
  out << "pairs " << pair_rows << '\n';
  for (const PairDepths& p : field.pairs) {
    for (size_t t = 0; t < p.size(); ++t) {
      out << p.view_i << ' ' << p.view_j << ' ' << t << ' '
          << format_double(p.pixels_i[t].x()) << ' '
          << format_double(p.pixels_i[t].y()) << ' '
          << format_double(p.z_i[t]) << ' ' << format_double(p.err_i[t])
          << ' ' << int(p.rc[t]) << '\n';
    }
    for (size_t t = 0; t < p.size(); ++t) {
      out << p.view_j << ' ' << p.view_i << ' ' << t << ' '
          << format_double(p.pixels_j[t].x()) << ' '
          << format_double(p.pixels_j[t].y()) << ' '
          << format_double(p.z_j[t]) << ' ' << format_double(p.err_j[t])
          << ' ' << int(p.rc[t]) << '\n';
    }
  }
  size_t chain_rows = 0;
  for (const ChainDepths& c : field.chains) chain_rows += c.size();
  out << "chains " << chain_rows << '\n';
  for (const ChainDepths& c : field.chains) {
    for (size_t t = 0; t < c.size(); ++t) {
      out << c.view_i << ' ' << c.bridge_view_j << ' ' << c.view_k << ' ' << t
          << ' ' << c.indices_ij[t] << ' ' << c.indices_jk[t] << ' '
          << format_double(c.bridge_gap[t]) << ' ' << int(c.ppc[t]) << '\n';
    }
  }
}

DepthField read_depth_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingInput", "cannot open " + path);
  std::string tag;
  size_t pair_rows = 0;
  if (!(in >> tag >> pair_rows) || tag != "pairs") {
    parse_fail(path, "expected 'pairs <count>' header");
  }

  DepthField field;
  std::map<std::pair<int, int>, size_t> pair_index;
  for (size_t r = 0; r < pair_rows; ++r) {
    int view, other;
    size_t idx;
    double x, y, z, err;
    int rc;
    if (!(in >> view >> other >> idx >> x >> y >> z >> err >> rc)) {
      parse_fail(path, "malformed pair row");
    }
    const std::pair<int, int> key{std::min(view, other),
                                  std::max(view, other)};
    auto it = pair_index.find(key);
    if (it == pair_index.end()) {
      it = pair_index.emplace(key, field.pairs.size()).first;
      field.pairs.emplace_back();
      field.pairs.back().view_i = key.first;
      field.pairs.back().view_j = key.second;
    }
    PairDepths& p = field.pairs[it->second];
    const bool i_side = view == p.view_i;
    auto& pixels = i_side ? p.pixels_i : p.pixels_j;
    auto& zs = i_side ? p.z_i : p.z_j;
    auto& errs = i_side ? p.err_i : p.err_j;
    if (idx >= pixels.size()) {
      pixels.resize(idx + 1, Eigen::Vector2d::Zero());
      zs.resize(idx + 1, 0.0);
      errs.resize(idx + 1, 0.0);
    }
    if (idx >= p.rc.size()) p.rc.resize(idx + 1, 0);
    pixels[idx] = Eigen::Vector2d(x, y);
    zs[idx] = z;
    errs[idx] = err;
    p.rc[idx] = rc != 0 ? 1 : 0;
  }
  for (PairDepths& p : field.pairs) {
    if (p.pixels_i.size() != p.pixels_j.size()) {
      parse_fail(path, "pair rows missing one side");
    }
  }

  size_t chain_rows = 0;
  if (!(in >> tag >> chain_rows) || tag != "chains") {
    parse_fail(path, "expected 'chains <count>' header");
  }
  std::map<std::array<int, 3>, size_t> chain_index;
  for (size_t r = 0; r < chain_rows; ++r) {
    int vi, vj, vk;
    size_t idx;
    int idx_ij, idx_jk, ppc;
    double gap;
    if (!(in >> vi >> vj >> vk >> idx >> idx_ij >> idx_jk >> gap >> ppc)) {
      parse_fail(path, "malformed chain row");
    }
    const std::array<int, 3> key{vi, vj, vk};
    auto it = chain_index.find(key);
    if (it == chain_index.end()) {
      it = chain_index.emplace(key, field.chains.size()).first;
      field.chains.emplace_back();
      field.chains.back().view_i = vi;
      field.chains.back().bridge_view_j = vj;
      field.chains.back().view_k = vk;
    }
    ChainDepths& c = field.chains[it->second];
    if (idx >= c.indices_ij.size()) {
      c.indices_ij.resize(idx + 1, 0);
      c.indices_jk.resize(idx + 1, 0);
      c.bridge_gap.resize(idx + 1, 0.0);
      c.ppc.resize(idx + 1, 0);
    }
    c.indices_ij[idx] = idx_ij;
    c.indices_jk[idx] = idx_jk;
    c.bridge_gap[idx] = gap;
    c.ppc[idx] = ppc != 0 ? 1 : 0;
  }
  return field;
}

}  // namespace sv
